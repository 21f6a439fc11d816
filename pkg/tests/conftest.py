"""Shared fixtures.

Every trace any test produces through the solver or ``RunTrace.from_profiles``
is certified after the test: NashGap(average) <= CCE gap + 2M sqrt(2 EFM).
"""

from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from regretforge import harness
from regretforge.efg import trace as trace_mod
from regretforge.marginal import certify_bound
from regretforge.regret import solver

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

CERTIFIED = {"traces": 0, "worst_slack": np.inf}
# criterion number -> one-line verdict, printed at the end of the session
ACCEPTANCE = {}


def pytest_collection_modifyitems(items):
    """Run the acceptance suite last so its certificate count covers every other test."""
    items.sort(key=lambda item: item.module.__name__ == "test_acceptance")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
    terminalreporter.write_line(
        f"certified traces: {CERTIFIED['traces']}, worst slack {CERTIFIED['worst_slack']:.3e}")


@dataclass
class GameView:
    layout: object
    utilities: np.ndarray

    @property
    def n_players(self):
        return self.layout.n_players

    @property
    def n_terminals(self):
        return self.layout.n_terminals

    @property
    def max_abs_utility(self):
        return float(np.abs(self.utilities).max())


def _flatten(layout, utilities, trace):
    batch = trace.batch_shape
    if not batch:
        yield GameView(layout, np.asarray(utilities)), trace
        return
    flat_u = np.asarray(utilities).reshape((-1,) + utilities.shape[-2:])
    for g in range(int(np.prod(batch))):
        yield GameView(layout, flat_u[g]), trace.game(g)


@pytest.fixture(autouse=True)
def certify_every_trace(monkeypatch):
    produced = []
    real_solve = solver.solve_layout
    real_from_profiles = trace_mod.RunTrace.from_profiles.__func__

    def recording_solve(layout, utilities, config, predictor=None):
        tr = real_solve(layout, utilities, config, predictor=predictor)
        produced.append((layout, utilities, tr))
        for snap in tr.snapshots.values():
            produced.append((layout, utilities, snap))
        return tr

    def recording_from_profiles(cls, game, strategies):
        tr = real_from_profiles(cls, game, strategies)
        produced.append((game.layout, game.utilities, tr))
        return tr

    monkeypatch.setattr(solver, "solve_layout", recording_solve)
    monkeypatch.setattr(harness, "solve_layout", recording_solve)
    monkeypatch.setattr(trace_mod.RunTrace, "from_profiles", classmethod(recording_from_profiles))
    yield produced
    for layout, utilities, tr in produced:
        for game, single in _flatten(layout, utilities, tr):
            cert = certify_bound(game, single)
            CERTIFIED["traces"] += 1
            CERTIFIED["worst_slack"] = min(CERTIFIED["worst_slack"], cert.slack)
