from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from glminmax import cli
from glminmax.errors import ConfigError
from glminmax.manifold import MeshManifold
from glminmax.minmax import FlowConfig
from glminmax.tables import read_table, write_table


def small_config(**kw) -> cli.RunConfig:
    base = dict(model="flat_torus_2d", resolution=16, eps=[0.4, 0.3], grid=(3, 8),
                flow=FlowConfig(max_iter=60), morse_k=6, stress=False)
    base.update(kw)
    return cli.RunConfig(**base)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.run(small_config(), out) == cli.EXIT_OK
    return out


def test_config_roundtrip():
    cfg = small_config(seed=3, tol=1e-9, ellipticity=False)
    back = cli.RunConfig.from_text(cfg.to_text())
    assert back == cfg


def test_config_rejects_unknown_keys():
    text = small_config().to_text() + "\n[extra]\nfoo = 1\n"
    with pytest.raises(ConfigError):
        cli.RunConfig.from_text(text)
    text = small_config().to_text().replace("[flow]", "[flow]\nspeed = 3")
    with pytest.raises(ConfigError):
        cli.RunConfig.from_text(text)


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(eps=[-0.1]).validate()
    with pytest.raises(ConfigError):
        small_config(eps=[0.1, 0.2]).validate()
    with pytest.raises(ConfigError):
        small_config(model="mobius").validate()


def test_negative_eps_exit_code(tmp_path, capsys):
    cfg_path = tmp_path / "bad.ini"
    cfg_path.write_text(small_config().to_text().replace("eps = 0.4, 0.3", "eps = -0.4"))
    assert cli.main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == cli.EXIT_INVALID


def test_unresolved_eps_writes_failed_marker(tmp_path):
    out = tmp_path / "o"
    code = cli.run(small_config(eps=[0.01]), out)
    assert code == cli.EXIT_COMPUTE
    text = (out / cli.FAILED).read_text()
    assert text.startswith("stage: manifold") and "ResolutionError" in text
    checks = cli.verify(out)
    assert not checks[0].ok
    assert cli.main(["verify", str(out)]) == cli.EXIT_VERIFY


def test_bad_arguments_exit_invalid():
    assert cli.main(["frobnicate"]) == cli.EXIT_INVALID


def test_run_outputs(run_dir):
    for name in ("config.ini", "mesh.txt", "summary.tsv", "timing.tsv"):
        assert (run_dir / name).exists()
    _, cols, rows, _ = read_table(run_dir / "summary.tsv")
    assert cols[:3] == ["eps", "abs_log_eps", "c_estimate"]
    assert [r[0] for r in rows] == [0.4, 0.3]
    for e in ("0.4", "0.3"):
        d = run_dir / f"eps_{e}"
        for name in ("refined.txt", "history.tsv", "result.tsv", "family/family.json",
                     "concentration/report.json"):
            assert (d / name).exists(), name
    assert MeshManifold.load(run_dir / "mesh.txt").n_vertices == 256


def test_verify_passes(run_dir, capsys):
    checks = cli.verify(run_dir)
    assert checks and all(c.ok for c in checks), [c for c in checks if not c.ok]
    assert cli.main(["verify", str(run_dir)]) == cli.EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_verify_detects_tampering(run_dir, tmp_path):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(run_dir, copy)
    path = copy / "eps_0.3" / "refined.txt"
    lines = path.read_text().splitlines()
    k = next(i for i, line in enumerate(lines) if not line.startswith("#"))
    a, b = (float(x) for x in lines[k].split())
    lines[k] = f"{a + 0.05!r} {b!r}"
    path.write_text("\n".join(lines) + "\n")
    checks = cli.verify(copy)
    assert not all(c.ok for c in checks)


def test_rerun_reproducible(run_dir, tmp_path):
    assert cli.run(small_config(), tmp_path / "again") == cli.EXIT_OK
    assert (tmp_path / "again" / "summary.tsv").read_bytes() == (run_dir / "summary.tsv").read_bytes()


def test_output_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    cfg = small_config(eps=[0.4], hodge=False, density=False, ellipticity=False, bochner=False)
    assert cli.run(cfg) == cli.EXIT_OK
    assert (tmp_path / "env" / "summary.tsv").exists()


def test_mesh_command(tmp_path, capsys):
    out = tmp_path / "m.txt"
    assert cli.main(["mesh", "unit_sphere", str(out), "--resolution", "1"]) == cli.EXIT_OK
    assert MeshManifold.load(out).n_vertices == 42
    assert cli.main(["mesh", "flat_torus_2d", str(out), "--resolution", "2"]) == cli.EXIT_INVALID


def test_vortex_law_command(capsys):
    assert cli.main(["vortex-law", "1e-2", "1e-3", "1e-4"]) == cli.EXIT_OK
    assert "slope 3.14159" in capsys.readouterr().out
    assert cli.main(["vortex-law", "0.1", "--quadrature", "2"]) == cli.EXIT_INVALID


def test_table_roundtrip(tmp_path):
    write_table(tmp_path / "t.tsv", "demo", ["a", "b"], [[1, 0.5], [2, np.pi]], ["note"])
    schema, cols, rows, comments = read_table(tmp_path / "t.tsv")
    assert schema == "demo" and cols == ["a", "b"] and comments == ["note"]
    assert rows[1][1] == pytest.approx(np.pi, rel=1e-11)
    Path(tmp_path / "u.tsv").write_text("a\tb\n1\t2\n")
    with pytest.raises(ValueError):
        read_table(tmp_path / "u.tsv")


def test_hodge_sweep_table(tmp_path):
    cfg = small_config(eps=[0.5, 0.4, 0.3], density=False, ellipticity=False, bochner=False,
                       morse_k=0)
    assert cli.run(cfg, tmp_path) == cli.EXIT_OK
    schema, cols, rows, _ = read_table(tmp_path / "hodge_sweep.tsv")
    assert schema == "hodge-sweep" and len(rows) == 3
    assert cols[-2:] == ["dstar_xi_L1.1", "dstar_xi_L1.25"]
