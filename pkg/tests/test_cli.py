import math

import pytest

from patchsmooth.cli import _fmt, _render, main, parse_args


def test_parse_defaults():
    spec = parse_args(["smooth"])
    assert spec.command == "smooth"
    assert spec.patch_sizes == ((64, 64, 64),)
    assert spec.num_patches == 1
    assert spec.mixed is False
    assert spec.block_dims is None
    assert spec.scheme == "block_jacobi"
    assert spec.omega is None
    assert spec.steps == 3
    assert spec.strategy.kind == "serial"
    assert spec.seed == 42
    assert spec.window == (400, 100)
    assert spec.repeat == 3
    assert spec.out is None


def test_parse_full_bench_invocation():
    spec = parse_args(
        [
            "bench",
            "--mixed-table2",
            "--block-size",
            "8x8x8",
            "--scheme",
            "chaotic-gs",
            "--strategy",
            "two-level",
            "--patch-workers",
            "4",
            "--block-workers",
            "6",
            "--repeat",
            "5",
        ]
    )
    assert spec.mixed is True
    assert spec.block_dims == (8, 8, 8)
    assert spec.scheme == "chaotic_block_gs"
    assert spec.strategy.kind == "two_level"
    assert spec.strategy.patch_workers == 4
    assert spec.strategy.block_workers == 6
    assert spec.repeat == 5


def test_parse_multiple_patch_sizes():
    spec = parse_args(["smooth", "--patch-size", "8x8x8", "--patch-size", "6x5x4"])
    assert spec.patch_sizes == ((8, 8, 8), (6, 5, 4))


def test_parse_window_and_omega():
    spec = parse_args(["converge", "--window", "10,5", "--omega", "0.9"])
    assert spec.window == (10, 5)
    assert spec.omega == 0.9


@pytest.mark.parametrize(
    "argv",
    [
        ["smooth", "--patch-size", "0x2x2"],
        ["smooth", "--patch-size", "8x8"],
        ["smooth", "--block-size", "2x2x"],
        ["smooth", "--window", "5"],
        ["smooth", "--window", "-1,5"],
        ["smooth", "--omega", "0.0"],
        ["smooth", "--omega", "1.5"],
        ["smooth", "--steps", "0"],
        ["smooth", "--repeat", "0"],
        ["smooth", "--num-patches", "0"],
        ["smooth", "--mixed-table2", "--patch-size", "8x8x8"],
        ["smooth", "--mixed-table2", "--num-patches", "2"],
        ["smooth", "--patch-size", "8x8x8", "--patch-size", "4x4x4", "--num-patches", "2"],
        ["smooth", "--patch-workers", "2"],
        ["smooth", "--strategy", "block", "--patch-workers", "2"],
        ["smooth", "--strategy", "patch", "--block-workers", "2"],
        ["smooth", "--strategy", "patch", "--patch-workers", "0"],
        ["converge", "--num-patches", "2"],
        ["converge", "--mixed-table2"],
        ["nonsense"],
        [],
    ],
)
def test_parse_rejects(argv):
    with pytest.raises(SystemExit) as exc:
        parse_args(argv)
    assert exc.value.code == 2


def test_fmt_round_trips():
    for x in (1.0 / 3.0, 0.1, 123456.789e-12, 2.0, math.pi):
        assert float(_fmt(x)) == x


def test_render_blank_table():
    assert _render("a,b", []) == "a,b\n"
    assert _render("a,b", [["1", "2"], ["3", "4"]]) == "a,b\n1,2\n3,4\n"


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_converge_output_schema(capsys):
    code, out = _run(
        capsys,
        ["converge", "--patch-size", "8x8x8", "--block-size", "2x2x2", "--steps", "3"],
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "scheme,block,patch,seed,step,residual_l2,relative_error"
    assert len(lines) == 1 + 4
    first = lines[1].split(",")
    assert first[:5] == ["block_jacobi", "2x2x2", "8x8x8", "42", "0"]
    assert float(first[6]) == 1.0
    rel = [float(line.split(",")[6]) for line in lines[1:]]
    assert all(b < a for a, b in zip(rel, rel[1:]))


def test_converge_sweeps_default_blocks(capsys):
    code, out = _run(capsys, ["converge", "--patch-size", "8x8x8", "--steps", "1"])
    assert code == 0
    lines = out.splitlines()[1:]
    # 7 default block sizes, 2 rows each (steps 0 and 1)
    assert len(lines) == 14
    blocks = [line.split(",")[1] for line in lines[::2]]
    assert blocks == ["2x2x2", "4x2x2", "4x4x2", "4x4x4", "8x4x4", "8x8x4", "8x8x8"]


def test_smooth_multi_patch_output(capsys):
    code, out = _run(
        capsys,
        [
            "smooth",
            "--patch-size",
            "8x8x8",
            "--num-patches",
            "2",
            "--block-size",
            "4x4x4",
            "--scheme",
            "chaotic-gs",
            "--steps",
            "2",
        ],
    )
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 1 + 3
    row = lines[1].split(",")
    assert row[0] == "chaotic_block_gs"
    assert row[2] == "8x8x8-n2"


def test_bench_serial_row(capsys):
    code, out = _run(
        capsys,
        [
            "bench",
            "--patch-size",
            "8x8x8",
            "--block-size",
            "4x4x4",
            "--steps",
            "1",
            "--repeat",
            "1",
        ],
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("patch_spec,block,scheme,strategy,p,q,steps,")
    assert len(lines) == 2
    row = lines[1].split(",")
    assert row[:7] == ["8x8x8", "4x4x4", "block_jacobi", "serial", "1", "1", "1"]
    wall, cps = float(row[7]), float(row[8])
    assert wall > 0.0
    assert cps == 512 / wall
    assert float(row[10]) == 1.0
    assert float(row[11]) == 1.0


def test_bench_adds_serial_baseline(capsys):
    code, out = _run(
        capsys,
        [
            "bench",
            "--patch-size",
            "8x8x8",
            "--num-patches",
            "2",
            "--block-size",
            "4x4x4",
            "--steps",
            "1",
            "--repeat",
            "1",
            "--strategy",
            "patch",
            "--patch-workers",
            "2",
        ],
    )
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 3
    serial_row = lines[1].split(",")
    par_row = lines[2].split(",")
    assert serial_row[3] == "serial"
    assert par_row[3] == "patch_parallel"
    assert (par_row[4], par_row[5]) == ("2", "1")
    assert float(serial_row[10]) == 1.0
    assert float(par_row[10]) > 0.0


def test_inverses_rows(capsys):
    code, out = _run(
        capsys,
        ["inverses", "--patch-size", "10x10x10", "--block-size", "4x4x4"],
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "block,extent,order,invert_seconds,multiply_back_inf_error"
    # 10 = 4+4+2 per axis, so extents {4,2}^3 = 8 shapes
    assert len(lines) == 1 + 8
    extents = [line.split(",")[1] for line in lines[1:]]
    assert extents[0] == "4x4x4"
    assert len(set(extents)) == 8
    for line in lines[1:]:
        row = line.split(",")
        assert row[0] == "4x4x4"
        assert float(row[4]) < 1e-12


def test_out_file_is_byte_stable(tmp_path):
    target = tmp_path / "hist.csv"
    argv = [
        "converge",
        "--patch-size",
        "6x6x6",
        "--block-size",
        "2x2x2",
        "--steps",
        "2",
        "--out",
        str(target),
    ]
    assert main(argv) == 0
    first = target.read_bytes()
    assert main(argv) == 0
    assert target.read_bytes() == first
    assert b"\r" not in first
    assert first.endswith(b"\n")
    assert not first.endswith(b"\n\n")


def test_main_reports_runtime_errors(tmp_path, capsys):
    bad = tmp_path / "missing" / "out.csv"
    code = main(
        [
            "converge",
            "--patch-size",
            "4x4x4",
            "--block-size",
            "2x2x2",
            "--steps",
            "1",
            "--out",
            str(bad),
        ]
    )
    assert code == 1
    assert capsys.readouterr().err.startswith("error:")


def test_main_rejects_oversized_study(capsys):
    code = main(["smooth", "--patch-size", "900x900x900", "--steps", "1"])
    assert code == 1
    assert "PATCHSMOOTH_MAX_CELLS" in capsys.readouterr().err
