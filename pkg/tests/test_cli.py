import json
import os

import pytest

from fatou_access import cli
from fatou_access.cli import (
    RunConfig,
    parse_component,
    parse_radii,
    parse_rect,
    run_command,
)
from fatou_access.core import InternalInconsistency, PreconditionError
from fatou_access.dynamics import Target
from fatou_access.maps import Direction, parse_map_spec


def _run(capsys, *argv):
    code = run_command(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_blaschke_z_squared(capsys):
    code, out, _ = _run(capsys, "blaschke", "theta=0;zeros=0,0", "--check")
    assert code == 0
    assert out.strip() == "D=1, class=elliptic, DW=0, multiplier=0"


def test_blaschke_hyperbolic(capsys):
    code, out, _ = _run(capsys, "blaschke", "theta=0;zeros=0.7071067811865476i,-0.7071067811865476i")
    assert code == 0 and out.startswith("D=3, class=hyperbolic, DW=1")


@pytest.mark.parametrize("argv", [
    ("blaschke", "theta=0;zeros=0"),
    ("blaschke", "theta=0;zeros=1.5"),
    ("classify", "--map", "z+sin"),
    ("classify", "--map", "z-tan", "--rect", "1,1,0,0"),
    ("classify", "--map", "z-tan", "--rect", "a,b"),
    ("accesses", "--map", "z-tan"),
    ("accesses", "--map", "z-tan", "--component", "attracted:0.5"),
    ("render",),
])
def test_precondition_exit_code(capsys, tmp_path, argv):
    code, _, err = _run(capsys, *argv, *(() if argv[0] == "blaschke" else ("--out", str(tmp_path))))
    assert code == 2 and err.startswith("error:")


def test_inconsistency_exit_code(capsys, monkeypatch):
    def boom(*a, **k):
        raise InternalInconsistency("forced")
    monkeypatch.setattr(cli, "denjoy_wolff_and_classify", boom)
    code, _, err = _run(capsys, "blaschke", "theta=0;zeros=0,0")
    assert code == 3 and "forced" in err


def test_parse_helpers():
    assert parse_rect("-1,-2,3,4") == (-1.0, -2.0, 3.0, 4.0)
    assert parse_radii("10pi,20pi,2.5") == pytest.approx((31.4159265, 62.8318531, 2.5))
    with pytest.raises(PreconditionError):
        parse_radii("__import__('os')")
    m = parse_map_spec("z-tan")
    assert parse_component(m, "attracted:3.1416", (-8, -8, 8, 8)) == Target("fixed", complex(3.141592653589793))
    t = parse_map_spec("z+i+tan")
    assert parse_component(t, "baker:down:0", (-8, -8, 8, 8)) == Target("baker", None, Direction.DOWN, 0)
    with pytest.raises(PreconditionError):
        parse_component(t, "baker:sideways", (-8, -8, 8, 8))


def test_classify_cache_hit_and_no_cache(capsys, tmp_path):
    args = ("classify", "--map", "z-tan", "--rect=-3,-3,3,3", "--res", "40", "--out", str(tmp_path))
    code, out1, err1 = _run(capsys, *args)
    assert code == 0 and "computed" in err1
    mask_name = json.loads(out1)["mask"]
    first = (tmp_path / "cache" / mask_name).read_bytes()
    code, out2, err2 = _run(capsys, *args)
    assert code == 0 and "cache hit" in err2 and out1 == out2
    code, _, err3 = _run(capsys, *args, "--no-cache")
    assert code == 0 and "computed" in err3
    assert (tmp_path / "cache" / mask_name).read_bytes() == first
    assert not [p for p in (tmp_path / "cache").iterdir() if p.name.endswith(".tmp")]


def test_render_preset_command(capsys, tmp_path):
    code, out, _ = _run(capsys, "render", "fig3-sine", "--out", str(tmp_path), "--workers", "4")
    assert code == 0
    png = tmp_path / "fig3-sine.png"
    assert out.splitlines()[0] == str(png) and png.stat().st_size > 0


def test_render_list(capsys):
    code, out, _ = _run(capsys, "render", "--list")
    assert code == 0 and len(out.strip().splitlines()) == 5


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"map": "z+tan", "rect": [-2, -2, 2, 2], "resolution": 30,
                               "out_dir": str(tmp_path / "o")}))
    code, out, _ = _run(capsys, "classify", "--config", str(cfg), "--res", "20")
    assert code == 0
    rep = json.loads(out)
    assert rep["map"] == "z+tan" and rep["resolution"] == 20
    assert sum(rep["cells"].values()) == 400


def test_config_rejects_unknown_fields(capsys, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"map": "z+tan", "colour": "red"}))
    code, _, err = _run(capsys, "classify", "--config", str(cfg))
    assert code == 2 and "colour" in err


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_out_dir(capsys, tmp_path):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    code, _, _ = _run(capsys, "classify", "--map", "z-tan", "--res", "8", "--out", str(ro / "x"))
    assert code == 2


def test_out_dir_is_a_file(capsys, tmp_path):
    f = tmp_path / "file"
    f.write_text("")
    code, _, err = _run(capsys, "classify", "--map", "z-tan", "--res", "8", "--out", str(f))
    assert code == 2 and "error" in err


def test_config_hash_ignores_workers_and_out():
    a = RunConfig(map="z-tan")
    b = RunConfig(map="z-tan", workers=8, out_dir="elsewhere")
    c = RunConfig(map="z+tan")
    assert a.config_hash() == b.config_hash() != c.config_hash()
    assert cli.provenance(a) == cli.provenance(b)


def test_report_validates_against_schema(capsys, tmp_path):
    code, out, _ = _run(capsys, "report", "--map", "z-tan", "--component", "attracted:0",
                        "--out", str(tmp_path), "--workers", "4")
    assert code == 0
    rep = json.loads(out)
    cli.validate_report(rep)
    assert rep["verdict"] == "stable" and rep["channels"] == 2 and rep["invariant_channels"] == 2
    assert rep["degree"] == 3 and rep["singularity_estimate"] is None
    acc = sorted(p["pole"][0] for p in rep["accessible_poles"] if p["accessible"])
    assert acc == pytest.approx([-1.5707963267948966, 1.5707963267948966])
    saved = list(tmp_path.glob("report-*.json"))
    assert len(saved) == 1 and json.loads(saved[0].read_text()) == rep


def test_schema_rejects_bad_report():
    with pytest.raises(InternalInconsistency):
        cli.validate_report({"map": "z-tan"})
