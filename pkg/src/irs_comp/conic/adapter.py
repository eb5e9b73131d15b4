"""Seam for checking the bundled solvers against an external one.

Problems travel through a JSON exchange document so the external side sees
exactly what a separate process would see. Schema (all numbers written with
17 significant digits)::

    {"kind": "socp", "num_vars": n, "objective_index": i,
     "cones": [{"type": "soc" | "rotated", "A": [[...]], "b": [...],
                "f": [...], "g": g}, ...],
     "x0": [...] | null}

    {"kind": "sdp", "dim": n,
     "psi_re": [[[...]]], "psi_im": [[[...]]], "const": [...],
     "diag": 1.0}

``diag`` records the unit-diagonal constraint on ``Theta``.
The only backend shipped is cvxpy; a missing package or a failed solve raises
:class:`AdapterError` rather than falling back to the bundled solver.
"""

from __future__ import annotations

import json
from typing import Union

import numpy as np

from .problems import OPTIMAL, MAX_ITER, Cone, ConicSolution, SdpProblem, SocpProblem

Problem = Union[SocpProblem, SdpProblem]


class AdapterError(RuntimeError):
    pass


def _enc(x) -> float:
    return float(f"{float(x):.17g}")


def _mat(a) -> list:
    return [[_enc(v) for v in row] for row in np.atleast_2d(a)]


def _vec(a) -> list:
    return [_enc(v) for v in np.ravel(a)]


def problem_to_json(problem: Problem) -> str:
    if isinstance(problem, SocpProblem):
        doc = {
            "kind": "socp",
            "num_vars": problem.num_vars,
            "objective_index": problem.objective_index,
            "cones": [
                {"type": c.kind, "A": _mat(c.A), "b": _vec(c.b), "f": _vec(c.f), "g": _enc(c.g)}
                for c in problem.cones
            ],
            "x0": None if problem.x0 is None else _vec(problem.x0),
        }
    elif isinstance(problem, SdpProblem):
        doc = {
            "kind": "sdp",
            "dim": problem.dim,
            "psi_re": [_mat(p.real) for p in problem.psi],
            "psi_im": [_mat(p.imag) for p in problem.psi],
            "const": _vec(problem.const),
            "diag": 1.0,
        }
    else:
        raise TypeError(f"cannot serialize {type(problem).__name__}")
    return json.dumps(doc)


def problem_from_json(text: str) -> Problem:
    doc = json.loads(text)
    kind = doc.get("kind")
    if kind == "socp":
        n = int(doc["num_vars"])
        cones = []
        for c in doc["cones"]:
            a = np.array(c["A"], dtype=float).reshape(-1, n)
            cones.append(Cone(c["type"], a, np.array(c["b"], dtype=float),
                              np.array(c["f"], dtype=float), float(c["g"])))
        x0 = doc.get("x0")
        return SocpProblem(n, int(doc["objective_index"]), tuple(cones),
                           None if x0 is None else np.array(x0, dtype=float))
    if kind == "sdp":
        if float(doc.get("diag", 1.0)) != 1.0:
            raise ValueError("only unit-diagonal SDPs are supported")
        psi = np.array(doc["psi_re"], dtype=float) + 1j * np.array(doc["psi_im"], dtype=float)
        return SdpProblem(psi, np.array(doc["const"], dtype=float))
    raise ValueError(f"unknown problem kind {kind!r}")


class CvxpySolver:
    """External backend built on cvxpy (default conic solver CLARABEL)."""

    def __init__(self, solver: str = "CLARABEL", **solver_options):
        self.solver = solver
        self.solver_options = solver_options

    def _cvxpy(self):
        try:
            import cvxpy as cp
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise AdapterError("cvxpy is not installed") from exc
        if self.solver not in cp.installed_solvers():
            raise AdapterError(f"solver {self.solver} is not available to cvxpy")
        return cp

    def solve_document(self, text: str) -> ConicSolution:
        cp = self._cvxpy()
        problem = problem_from_json(text)
        if isinstance(problem, SocpProblem):
            x = cp.Variable(problem.num_vars)
            cons = []
            for c in problem.cones:
                u = c.A @ x + c.b
                s = c.f @ x + c.g
                cons.append(cp.SOC(s, u) if c.kind == "soc" else cp.sum_squares(u) <= s)
            prob = cp.Problem(cp.Maximize(x[problem.objective_index]), cons)
        else:
            n = problem.dim
            theta = cp.Variable((n, n), hermitian=True)
            r = cp.Variable()
            cons = [theta >> 0, cp.real(cp.diag(theta)) == 1]
            cons += [cp.real(cp.trace(p @ theta)) + r <= c for p, c in zip(problem.psi, problem.const)]
            prob = cp.Problem(cp.Maximize(r), cons)
        try:
            prob.solve(solver=self.solver, **self.solver_options)
        except cp.error.SolverError as exc:
            raise AdapterError(f"{self.solver} failed: {exc}") from exc
        if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            raise AdapterError(f"{self.solver} returned status {prob.status}")
        status = OPTIMAL if prob.status == cp.OPTIMAL else MAX_ITER
        if isinstance(problem, SocpProblem):
            xv = np.asarray(x.value, dtype=float)
            return ConicSolution(status, float(xv[problem.objective_index]), x=xv,
                                 primal_residual=problem.max_violation(xv),
                                 info={"backend": self.solver})
        th = np.asarray(theta.value)
        th = 0.5 * (th + th.conj().T)
        return ConicSolution(status, problem.objective_at(th), theta=th,
                             primal_residual=max(0.0, -float(np.linalg.eigvalsh(th)[0])),
                             info={"backend": self.solver, "r": float(r.value)})


def external_solver_adapter(problem: Problem, solver=None) -> ConicSolution:
    """Solve ``problem`` through an external backend.

    ``solver`` is a backend object with ``solve_document(text)``, a cvxpy
    solver name, or ``None`` for cvxpy with CLARABEL.
    """
    if solver is None:
        solver = CvxpySolver()
    elif isinstance(solver, str):
        solver = CvxpySolver(solver)
    if not hasattr(solver, "solve_document"):
        raise AdapterError("solver handle must provide solve_document()")
    return solver.solve_document(problem_to_json(problem))
