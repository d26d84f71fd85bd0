import json
import math
import warnings

import numpy as np
import pytest
import yaml

from src.dephasing.tomography import forward_matrix, log_q_grid
from src.utils.errors import RankWarning
from src.utils.io import load_tabulated_csv
from src.main import EXIT_CONFIG, EXIT_OK, build_parser, run

LIGHT = [
    "--set", "numerics.q_nodes=64",
    "--set", "numerics.theta_nodes=32",
    "--set", "numerics.truncation=4",
    "--set", "output.precision=17",
]


def run_json(tmp_path, command, *extra):
    out = tmp_path / f"{command}.json"
    code = run([command, "--format", "json", "--out", str(out), "--threads", "1", *extra])
    payload = json.loads(out.read_text(encoding="utf-8")) if out.exists() else None
    return code, payload


def test_parser_lists_every_command():
    parser = build_parser()
    for command in ("sweep-beta", "sweep-alpha", "harmonics", "response-map", "tomography", "timescale"):
        args = parser.parse_args([command, "--set", "a=1"])
        assert args.command == command
        assert args.set == ["a=1"]


def test_timescale_altermagnet(tmp_path):
    code, payload = run_json(tmp_path, "timescale", "--set", "material.model=altermagnet")
    assert code == EXIT_OK
    values = {r["quantity"]: r["value"] for r in payload["records"]}
    assert values["t_am"] == pytest.approx(40.5e-6, rel=0.02)
    assert values["chi0_backsolved"] == pytest.approx(1.04e9, rel=0.01)
    assert payload["meta"]["command"] == "timescale"
    assert len(payload["meta"]["config_hash"]) == 16


def test_timescale_superconductor(tmp_path):
    code, payload = run_json(tmp_path, "timescale")
    assert code == EXIT_OK
    values = {r["quantity"]: r["value"] for r in payload["records"]}
    assert values["t_sc"] == pytest.approx(0.0951, rel=0.02)


def test_csv_to_stdout(capsys):
    assert run(["timescale", "--set", "material.model=antiferromagnet"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# toolkit: dephasometry")
    assert "quantity,value,unit" in lines


@pytest.mark.parametrize(
    "extra",
    [
        ["--set", "numerics.truncation"],
        ["--set", "numerics.trunctation=4"],
        ["--set", "sequence.kind=hahn"],
        ["--threads", "-1"],
        ["--set", "material.model=altermagnet", "--set", "material.superconductor.gap=s"],
    ],
)
def test_configuration_errors_exit_2(tmp_path, extra):
    code, payload = run_json(tmp_path, "timescale", *extra)
    assert code == EXIT_CONFIG
    assert payload is None


def test_unknown_key_in_run_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("geometry:\n  zz: 1.0e-8\n", encoding="utf-8")
    assert run(["timescale", "--config", str(path)]) == EXIT_CONFIG


def test_narrowband_needs_a_center_frequency(tmp_path):
    code, _ = run_json(
        tmp_path, "sweep-alpha", "--set", "material.model=antiferromagnet", "--set", "sequence.kind=narrowband", *LIGHT
    )
    assert code == EXIT_CONFIG


def test_sweep_alpha_has_only_second_harmonics(tmp_path):
    code, payload = run_json(
        tmp_path,
        "sweep-alpha",
        "--set", "material.model=antiferromagnet",
        "--set", "geometry.alpha.start=0",
        "--set", f"geometry.alpha.stop={15 * math.pi / 16!r}",
        "--set", "geometry.alpha.count=16",
        *LIGHT,
    )
    assert code == EXIT_OK
    values = np.array([r["phi_s"] for r in payload["records"]])
    assert values.shape == (16,)
    assert np.all(values > 0)
    # alpha_k = k pi / 16, so the DFT bin j holds the e^{2ij alpha} harmonic
    spectrum = np.abs(np.fft.fft(values))
    assert spectrum[1] > 1e-3 * spectrum[0]
    assert spectrum[1] == pytest.approx(spectrum[15], rel=1e-9)
    assert np.all(spectrum[2:15] < 1e-8 * spectrum[0])
    # Neel-axis pairs average to the isotropic part
    np.testing.assert_allclose(values[:8] + values[8:], 2 * values.mean(), rtol=1e-8)


def test_sweep_beta_bell_identities(tmp_path):
    code, payload = run_json(
        tmp_path,
        "sweep-beta",
        "--set", "material.model=antiferromagnet",
        "--set", "geometry.beta.count=5",
        *LIGHT,
    )
    assert code == EXIT_OK
    records = payload["records"]
    assert list(records[0]) == ["beta", "phi_c", "phi_s_i", "phi_s_j", "phi_bell_plus", "phi_bell_minus"]
    assert len(records) == 5
    for r in records:
        single = r["phi_s_i"] + r["phi_s_j"]
        assert r["phi_bell_plus"] == pytest.approx(single + 2 * r["phi_c"], rel=1e-12)
        assert r["phi_bell_minus"] == pytest.approx(single - 2 * r["phi_c"], rel=1e-12, abs=1e-12 * single)
        assert abs(r["phi_c"]) <= math.sqrt(r["phi_s_i"] * r["phi_s_j"]) * (1 + 1e-6)


def test_harmonics_table(tmp_path):
    code, payload = run_json(
        tmp_path,
        "harmonics",
        "--set", "material.model=altermagnet",
        "--set", "geometry.d_over_z_list=[4.0, 8.0]",
        *LIGHT,
    )
    assert code == EXIT_OK
    records = payload["records"]
    assert {r["d_over_z"] for r in records} == {4.0, 8.0}
    orders = sorted({r["n"] for r in records})
    assert orders == [-n for n in reversed(orders)]
    assert 0 in orders


def test_response_map_for_a_magnet(tmp_path):
    code, payload = run_json(
        tmp_path,
        "response-map",
        "--set", "material.model=antiferromagnet",
        "--set", "response_map.q.count=3",
        "--set", "response_map.theta.count=4",
    )
    assert code == EXIT_OK
    records = payload["records"]
    assert len(records) == 12
    assert list(records[0]) == ["q_tilde", "theta_q", "im_chi_norm", "response_O"]
    for r in records:
        assert r["im_chi_norm"] > 0
        # O = q^2 Im chi_N cos^2(theta_q) with the Neel axis along x
        expected = r["q_tilde"] ** 2 * r["im_chi_norm"] * math.cos(r["theta_q"]) ** 2
        assert r["response_O"] == pytest.approx(expected, rel=1e-7, abs=1e-15)


def test_response_map_csv_header_for_an_altermagnet(capsys):
    code = run(
        [
            "response-map",
            "--set", "material.model=altermagnet",
            "--set", "response_map.q.count=2",
            "--set", "response_map.theta.count=2",
        ]
    )
    assert code == EXIT_OK
    lines = [line for line in capsys.readouterr().out.splitlines() if not line.startswith("#")]
    assert lines[0] == "q_tilde,theta_q,im_chi_norm,response_O"
    assert len(lines) == 5


def test_response_map_of_a_tabulated_material(tmp_path):
    table = tmp_path / "table.csv"
    rows = [f"{q!r},{t!r},2.0" for q in (0.0, 1.0) for t in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)]
    table.write_text("q_tilde,theta_q,value\n" + "\n".join(rows) + "\n", encoding="utf-8")
    code, payload = run_json(
        tmp_path,
        "response-map",
        "--set", "material.model=tabulated",
        "--set", f"material.tabulated.path={table}",
        "--set", "material.tabulated.isotropic=true",
        "--set", "response_map.q.count=2",
        "--set", "response_map.theta.count=3",
    )
    assert code == EXIT_OK
    records = payload["records"]
    assert list(records[0]) == ["q_tilde", "theta_q", "value"]
    assert all(r["value"] == pytest.approx(2.0) for r in records)


@pytest.mark.slow
def test_response_map_of_a_superconductor_reads_back(tmp_path):
    out = tmp_path / "map.csv"
    code = run(
        [
            "response-map",
            "--out", str(out),
            "--threads", "1",
            "--set", f"cache.path={tmp_path / 'cache.sqlite'}",
            "--set", "material.superconductor.gap=d",
            "--set", "numerics.radial_nodes=16",
            "--set", "numerics.angular_nodes=32",
            "--set", "numerics.omega1_nodes=8",
            "--set", "response_map.q.count=2",
            "--set", "response_map.theta.count=2",
        ]
    )
    assert code == EXIT_OK
    lines = [line for line in out.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]
    assert lines[0] == "q_tilde,theta_q,re_sigma_over_sigma_n"
    q, theta, grid = load_tabulated_csv(out)
    assert grid.shape == (q.size, theta.size) == (2, 2)
    assert np.all(np.isfinite(grid))


def test_tomography_from_files(tmp_path):
    geometries = [(d, 1.0) for d in np.linspace(1.0, 12.0, 24)]
    q, widths = log_q_grid(geometries, 16)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankWarning)
        data = forward_matrix(geometries, q, widths, 0) @ np.exp(-(((q - 1.0) / 0.5) ** 2))
    geometry_file = tmp_path / "geometries.csv"
    geometry_file.write_text("D,z\n" + "".join(f"{float(d)!r},{float(z)!r}\n" for d, z in geometries), encoding="utf-8")
    measurement_file = tmp_path / "measurements.csv"
    measurement_file.write_text("channel,value\n" + "".join(f"0,{float(v)!r}\n" for v in data), encoding="utf-8")
    run_file = tmp_path / "run.yaml"
    run_file.write_text(
        yaml.safe_dump(
            {
                "tomography": {
                    "channel": 0,
                    "bins": 16,
                    "geometries": str(geometry_file),
                    "measurements": str(measurement_file),
                    "noise_level": 1e-10 * float(np.linalg.norm(data)),
                }
            }
        ),
        encoding="utf-8",
    )
    code, payload = run_json(tmp_path, "tomography", "--config", str(run_file))
    assert code == EXIT_OK
    records = payload["records"]
    assert len(records) == 16
    assert np.all(np.diff([r["q"] for r in records]) > 0)
    assert all(math.isfinite(r["estimate"]) for r in records)


def test_tomography_measurement_count_mismatch(tmp_path):
    geometry_file = tmp_path / "geometries.csv"
    geometry_file.write_text("D,z\n1.0,1.0\n2.0,1.0\n", encoding="utf-8")
    measurement_file = tmp_path / "measurements.csv"
    measurement_file.write_text("channel,value\n0,1.0\n", encoding="utf-8")
    code, _ = run_json(
        tmp_path,
        "tomography",
        "--set", "tomography.channel=0",
        "--set", f"tomography.geometries={geometry_file}",
        "--set", f"tomography.measurements={measurement_file}",
    )
    assert code == EXIT_CONFIG
