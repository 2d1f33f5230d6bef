"""Acceptance suite: every exit criterion at its stated tolerance.

The whole suite is executed once through the `verify` subcommand on the
default desk-scale configuration; each test then asserts one criterion from
the written report and prints its pass/fail line.
"""

import csv
from pathlib import Path

import pytest

from eivreg import cli

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default.yaml"

CRITERIA = [
    (1, "restriction exactness"),
    (2, "corrected-estimator sqrt(n) rate"),
    (3, "naive-estimator attenuation bias"),
    (4, "joint law agreement"),
    (5, "risk decomposition identity"),
    (6, "dominance thresholds"),
    (7, "efficiency curve shape"),
    (8, "affine limit closure"),
    (9, "reproducibility"),
]


@pytest.fixture(scope="session")
def verify_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    code = cli.main(["verify", "--config", str(CONFIG), "--out", str(out),
                     "--workers", "4"])
    rows = {}
    with (out / "criteria.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            rows[int(row["number"])] = row
    return code, rows, out


def test_verify_exit_code_zero(verify_run):
    code, rows, _ = verify_run
    assert len(rows) == len(CRITERIA)
    assert code == 0


@pytest.mark.parametrize("number,name", CRITERIA,
                         ids=[f"criterion_{n}" for n, _ in CRITERIA])
def test_criterion(verify_run, number, name, capsys):
    _, rows, _ = verify_run
    row = rows[number]
    passed = row["passed"] == "True"
    with capsys.disabled():
        print(f"\n{'PASS' if passed else 'FAIL'}  criterion {number}: "
              f"{row['name']} -- {row['detail']}")
    assert row["name"] == name
    assert passed, f"criterion {number} failed: {row['detail']}"


def test_report_file_written(verify_run):
    _, _, out = verify_run
    report = (out / "report.txt").read_text()
    assert report.count("\n") == len(CRITERIA)
    assert "FAIL" not in report
