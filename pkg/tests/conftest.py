import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from geophase.evolution import TimeGrid, evolve
from geophase.hamiltonians import RotatingField, eigenframe_trajectory

settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

FIXTURES = Path(__file__).parent / "fixtures"


def spin_run(w0, w, th, tau, tol=1e-10):
    """ODE trajectory from |E1(0)> and the closed-form frames on the same grid."""
    p = RotatingField(w0, w, th)
    grid = TimeGrid.for_model(p, 0.0, tau)
    psi0 = p.frame_vectors(np.array(0.0))[0][0]
    traj = evolve(p, psi0, grid, tol=tol)
    return p, traj, eigenframe_trajectory(p, grid.output_times)


def level_run(model, k, tau, t0=0.0, tol=1e-10):
    """Trajectory of a general model started in its level-k eigenvector."""
    grid = TimeGrid.for_model(model, t0, t0 + tau)
    frames = eigenframe_trajectory(model, grid.output_times)
    traj = evolve(model, frames.vectors[0, k], grid, tol=tol)
    return traj, frames


@pytest.fixture(scope="session")
def sampled_fixture_path():
    return FIXTURES / "sampled_3level.json"


TWO_PI = 2 * math.pi


def parse_csv_output(text):
    """(header, rows as float dicts, summary dict of strings) from simulate/sweep CSV."""
    import csv
    import io
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    summary = dict(ln[2:].split("=", 1) for ln in text.splitlines() if ln.startswith("# "))
    reader = csv.reader(io.StringIO("\n".join(body)))
    header = next(reader)
    rows = [{k: float(v) if v else None for k, v in zip(header, r)} for r in reader]
    return header, rows, summary


@pytest.fixture(scope="session")
def drift_sweep(tmp_path_factory):
    """CLI sweep at omega0 = 200, omega = 1, theta = pi/2, tau = 2pi .. 200pi (100 points)."""
    from geophase.cli import main
    out = tmp_path_factory.mktemp("sweep") / "drift.csv"
    code = main(["sweep", "--omega0", "200", "--omega", "1", "--theta", repr(math.pi / 2),
                 "--tau-start", repr(TWO_PI), "--tau-stop", repr(100 * TWO_PI), "--tau-count", "100",
                 "--out", str(out)])
    assert code == 0
    return parse_csv_output(out.read_text())


ACCEPTANCE_LINES = {}


def record_criterion(number, title, passed, detail):
    line = f"criterion {number} [{title}]: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
