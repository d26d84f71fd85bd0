import json

import numpy as np
import pytest

from src.utils.errors import ConfigError, ParameterError
from src.utils.io import (
    load_geometries,
    load_measurements,
    load_tabulated_csv,
    render_dataset,
    write_dataset,
)

RECORDS = [
    {"beta": 0.0, "phi_c": 1.0 / 3.0, "label": "a", "n": 2},
    {"beta": 1.5, "phi_c": float("nan"), "label": "b", "n": -2},
]
COLUMNS = ["beta", "phi_c", "label", "n"]
META = {"version": "0.4.0", "config_hash": "0123456789abcdef"}


def test_csv_has_comment_header_and_precision():
    text = render_dataset(RECORDS, COLUMNS, META, fmt="csv", precision=4)
    lines = text.splitlines()
    assert lines[0] == "# version: 0.4.0"
    assert lines[1] == "# config_hash: 0123456789abcdef"
    assert lines[2] == "beta,phi_c,label,n"
    assert lines[3] == "0,0.3333,a,2"
    assert lines[4].startswith("1.5,nan,b,-2")


def test_json_layout():
    payload = json.loads(render_dataset(RECORDS, COLUMNS, META, fmt="json", precision=4))
    assert payload["meta"] == META
    assert payload["records"][0] == {"beta": 0.0, "phi_c": 0.3333, "label": "a", "n": 2}
    assert payload["records"][1]["phi_c"] is None


def test_render_is_deterministic():
    assert render_dataset(RECORDS, COLUMNS, META) == render_dataset(RECORDS, COLUMNS, META)


def test_unknown_format():
    with pytest.raises(ParameterError):
        render_dataset(RECORDS, COLUMNS, META, fmt="xml")


def test_write_dataset(tmp_path, capsys):
    target = tmp_path / "out" / "data.csv"
    write_dataset(RECORDS, COLUMNS, META, path=str(target))
    assert target.read_text(encoding="utf-8") == render_dataset(RECORDS, COLUMNS, META)
    write_dataset(RECORDS, COLUMNS, META, path=None, fmt="json")
    assert json.loads(capsys.readouterr().out)["meta"] == META


def write_table(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_tabulated_grid(tmp_path):
    rows = ["# response exported from a model", "q_tilde,theta_q,value"]
    for q in (0.0, 0.5, 1.0):
        for theta in (0.0, np.pi / 2):
            rows.append(f"{q},{theta},{q + 10 * theta}")
    path = write_table(tmp_path, "resp.csv", "\n".join(rows) + "\n")
    q, theta, grid = load_tabulated_csv(path)
    np.testing.assert_allclose(q, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(theta, [0.0, np.pi / 2])
    np.testing.assert_allclose(grid, q[:, None] + 10 * theta[None, :])


def test_tabulated_grid_in_any_row_order(tmp_path):
    rows = [f"{q},{t},{q * t}" for q in (1.0, 2.0) for t in (0.0, 1.0)]
    path = write_table(tmp_path, "resp.csv", "q_tilde,theta_q,value\n" + "\n".join(rows[::-1]) + "\n")
    _, _, grid = load_tabulated_csv(path)
    np.testing.assert_allclose(grid, [[0.0, 1.0], [0.0, 2.0]])


def test_tabulated_errors(tmp_path):
    incomplete = write_table(tmp_path, "a.csv", "q_tilde,theta_q,value\n0,0,1\n0,1,1\n1,0,1\n")
    with pytest.raises(ConfigError, match="complete"):
        load_tabulated_csv(incomplete)
    repeated = write_table(tmp_path, "b.csv", "q_tilde,theta_q,value\n0,0,1\n0,0,2\n1,1,1\n1,1,1\n")
    with pytest.raises(ConfigError, match="repeats"):
        load_tabulated_csv(repeated)
    wrong = write_table(tmp_path, "c.csv", "q,theta,value\n0,0,1\n")
    with pytest.raises(ConfigError, match="lacks columns"):
        load_tabulated_csv(wrong)
    with pytest.raises(ConfigError, match="not found"):
        load_tabulated_csv(tmp_path / "missing.csv")
    with pytest.raises(ConfigError, match="no data rows"):
        load_tabulated_csv(write_table(tmp_path, "d.csv", "q_tilde,theta_q,value\n"))


def test_tabulated_grid_accepts_a_conductivity_map(tmp_path):
    rows = [f"{q},{t},{q + t}" for q in (0.5, 1.0) for t in (0.0, 1.0)]
    text = "# command: response-map\nq_tilde,theta_q,re_sigma_over_sigma_n\n" + "\n".join(rows) + "\n"
    _, _, grid = load_tabulated_csv(write_table(tmp_path, "map.csv", text))
    np.testing.assert_allclose(grid, [[0.5, 1.5], [1.0, 2.0]])


def test_geometries_and_measurements(tmp_path):
    geometries = write_table(tmp_path, "g.csv", "D,z\n1e-8,1e-8\n2e-8,1e-8\n")
    assert load_geometries(geometries) == [(1e-8, 1e-8), (2e-8, 1e-8)]

    measurements = write_table(tmp_path, "m.csv", "channel,value\n4,0.5\n0,9\n4,0.25\n")
    np.testing.assert_allclose(load_measurements(measurements, 4), [0.5, 0.25])
    np.testing.assert_allclose(load_measurements(measurements, 0), [9.0])
    with pytest.raises(ConfigError, match="no measurements"):
        load_measurements(measurements, 8)
