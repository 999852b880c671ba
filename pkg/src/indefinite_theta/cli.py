"""Batch front end: ``python -m indefinite_theta <command> --config job.json``.

A job file is JSON. Exact data (Gram matrix, coset, collection vectors,
points for sign functions) are integers or strings ``"p/q"``::

    {
      "lattice": [[2, 0], [0, -4]],
      "coset": ["0", "1/4"],
      "collection": {"kind": "cubical", "vectors": [[["0", "1"], ["1", "2"]]]},
      "tau": [[0.3, 1.1]],
      "x": ["3", "1"],
      "params": {"N": "10", "tol": 1e-10}
    }

For ``simplicial`` collections ``vectors`` is the list C_0..C_q. Every command
writes a JSON document containing the normalised job under ``"job"``; such
a document is accepted back as a job file.

Exit codes: 0 success, 1 input error, 2 refuted, 3 undecided, 4 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import chains, generf, theta
from .quadrature import QuadratureError
from .quadspace import as_fraction, frac_vector
from .suites import SUITES, run_suite

EXIT_OK, EXIT_INPUT, EXIT_REFUTED, EXIT_UNDECIDED, EXIT_NONCONV = 0, 1, 2, 3, 4

DEFAULT_PARAMS = {"N": "10", "tol": 1e-10, "mc_samples": 10 ** 6, "seed": 0, "resolution": "1/32",
                  "force": False, "h": 1e-3, "suite": "all"}


class InputError(ValueError):
    pass


@dataclass
class JobSpec:
    lattice: Optional[list] = None
    coset: Optional[list] = None
    collection: Optional[dict] = None
    tau: list = field(default_factory=list)
    x: Optional[list] = None
    C: Optional[list] = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "JobSpec":
        if "job" in data and isinstance(data["job"], dict):
            data = data["job"]
        unknown = set(data) - {"lattice", "coset", "collection", "tau", "x", "C", "params"}
        if unknown:
            raise InputError(f"unknown job keys: {sorted(unknown)}")
        params = dict(DEFAULT_PARAMS)
        params.update(data.get("params", {}))
        job = cls(lattice=data.get("lattice"), coset=data.get("coset"), collection=data.get("collection"),
                  tau=[list(map(float, t)) for t in data.get("tau", [])], x=data.get("x"), C=data.get("C"),
                  params=params)
        job._normalise()
        return job

    def _normalise(self):
        try:
            if self.lattice is not None:
                self.lattice = [[str(as_fraction(a)) for a in row] for row in self.lattice]
            if self.coset is not None:
                self.coset = [str(a) for a in frac_vector(self.coset)]
            if self.collection is not None:
                kind = self.collection.get("kind")
                if kind not in ("cubical", "simplicial"):
                    raise InputError("collection.kind must be 'cubical' or 'simplicial'")
                vecs = self.collection.get("vectors")
                if kind == "cubical":
                    vecs = [[[str(a) for a in frac_vector(v)] for v in pair] for pair in vecs]
                    if any(len(pair) != 2 for pair in vecs):
                        raise InputError("cubical vectors must be a list of pairs")
                else:
                    vecs = [[str(a) for a in frac_vector(v)] for v in vecs]
                self.collection = {"kind": kind, "vectors": vecs}
            if self.x is not None:
                self.x = _normalise_points(self.x)
            if self.C is not None:
                self.C = [_exact_or_float(v) for v in self.C]
            self.params["N"] = str(as_fraction(self.params["N"]))
            self.params["resolution"] = str(as_fraction(self.params["resolution"]))
            self.params["tol"] = float(self.params["tol"])
            self.params["h"] = float(self.params["h"])
            self.params["mc_samples"] = int(self.params["mc_samples"])
            self.params["seed"] = int(self.params["seed"])
            self.params["force"] = bool(self.params["force"])
        except (TypeError, ValueError) as exc:
            raise InputError(str(exc)) from exc
        for t in self.tau:
            if len(t) != 2 or not t[1] > 0:
                raise InputError(f"tau entries must be (u, v) with v > 0, got {t}")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("lattice", "coset", "collection", "tau", "x", "C", "params")}
        return {k: v for k, v in out.items() if v is not None}

    # builders

    def lattice_obj(self) -> theta.EvenLattice:
        if self.lattice is None:
            raise InputError("job has no lattice")
        try:
            return theta.EvenLattice([[as_fraction(a) for a in row] for row in self.lattice])
        except ValueError as exc:
            raise InputError(str(exc)) from exc

    def coset_obj(self, L: theta.EvenLattice) -> theta.Coset:
        mu = self.coset if self.coset is not None else ["0"] * L.rank
        try:
            return theta.Coset(mu).check(L)
        except ValueError as exc:
            raise InputError(str(exc)) from exc

    def collection_obj(self, space):
        if self.collection is None:
            raise InputError("job has no collection")
        try:
            if self.collection["kind"] == "cubical":
                return chains.CubicalCollection(space, tuple(tuple(p) for p in self.collection["vectors"]))
            return chains.SimplicialCollection(space, tuple(self.collection["vectors"]))
        except ValueError as exc:
            raise InputError(str(exc)) from exc

    def evaluator(self) -> generf.ErrorFunctionEvaluator:
        return generf.ErrorFunctionEvaluator(mc_samples=self.params["mc_samples"], rng_seed=self.params["seed"])


def _exact_or_float(v):
    try:
        return [str(a) for a in frac_vector(v)]
    except (TypeError, ValueError):
        return [float(a) for a in v]


def _normalise_points(x):
    if x and isinstance(x[0], (list, tuple)):
        return [_exact_or_float(v) for v in x]
    return [_exact_or_float(x)]


def _parse_vec(v):
    return tuple(Fraction(a) if isinstance(a, str) else a for a in v)


def _certificate(job: JobSpec, collection):
    res = Fraction(job.params["resolution"])
    if isinstance(collection, chains.CubicalCollection):
        return chains.good_position_cubical(collection, resolution=res)
    return chains.good_position_simplicial(collection)


def _gate(job: JobSpec, collection) -> Optional[int]:
    """Exit code when an uncertified collection must be rejected, else None."""
    if job.params["force"]:
        return None
    cert = _certificate(job, collection)
    if cert.certified:
        return None
    return EXIT_REFUTED if cert.status == chains.REFUTED else EXIT_UNDECIDED


def _space(job: JobSpec):
    return job.lattice_obj().space


# ---------------------------------------------------------------- commands

def cmd_check(job: JobSpec):
    collection = job.collection_obj(_space(job))
    cert = _certificate(job, collection)
    result = {"certificate": cert.to_dict(), "q": collection.q, "kind": job.collection["kind"]}
    if isinstance(collection, chains.CubicalCollection):
        result["very_good_position"] = chains.very_good_position(collection)
    code = {chains.CERTIFIED: EXIT_OK, chains.REFUTED: EXIT_REFUTED, chains.UNDECIDED: EXIT_UNDECIDED}[cert.status]
    return result, code


def cmd_phi(job: JobSpec):
    collection = job.collection_obj(_space(job))
    if job.x is None:
        raise InputError("phi needs job.x")
    rows = []
    for xv in job.x:
        x = _parse_vec(xv)
        if not all(isinstance(a, Fraction) for a in x):
            raise InputError("phi needs exact (integer or 'p/q') points")
        val = chains.phi(collection, x)
        neg = chains.phi(collection, tuple(-a for a in x))
        row = {"x": [str(a) for a in x], "phi": str(val), "phi_neg_x": str(neg)}
        if isinstance(collection, chains.CubicalCollection):
            s = chains.s_of_x_cubical(collection, x)
            row["s"] = None if s is None else [str(t) for t in s]
            if val != 0:
                row["intersection_number"] = str(chains.intersection_number_cubical(collection, x))
        else:
            sl = chains.s_of_x_simplicial(collection, x)
            row["s"] = None if sl is None else [str(t) for t in sl[0]]
            row["lambda"] = None if sl is None else str(sl[1])
        rows.append(row)
    return {"points": rows}, EXIT_OK


def cmd_erf(job: JobSpec):
    space = _space(job)
    if job.C is not None:
        C = [_parse_vec(v) for v in job.C]
    else:
        collection = job.collection_obj(space)
        C = collection.vertex(frozenset()) if isinstance(collection, chains.CubicalCollection) \
            else collection.omit({0})
    if job.x is None:
        raise InputError("erf needs job.x")
    ev = job.evaluator()
    rows = []
    for xv in job.x:
        x = np.array([float(a) for a in _parse_vec(xv)])
        rec = generf.eq_recursive(space, C, x, ev)
        mean, se = generf.eq_oracle(space, C, x, ev)
        rows.append({"x": xv, "recursive": rec, "oracle": mean, "stderr": se, "abs_diff": abs(rec - mean)})
    return {"C": [[str(a) for a in v] for v in C], "q": len(C), "points": rows}, EXIT_OK


def cmd_theta(job: JobSpec):
    L = job.lattice_obj()
    mu = job.coset_obj(L)
    collection = job.collection_obj(L.space)
    gate = _gate(job, collection)
    if gate is not None:
        return {"error": "collection is not certified in good position; use --force to override"}, gate
    N = Fraction(job.params["N"])
    ser = theta.holomorphic_theta(L, mu, collection, N, force=True)
    values = []
    for u, v in job.tau:
        tv = theta.completed_theta(L, mu, collection, theta.TauPoint(u, v), tol=job.params["tol"], force=True)
        values.append({"tau": [u, v], **tv.to_dict(),
                       "holomorphic_truncated": _cplx(ser.evaluate(theta.TauPoint(u, v)))})
    result = {"q_expansion": [[str(e), str(c)] for e, c in ser.terms], "N": str(N), "values": values}
    return result, EXIT_OK


def cmd_shadow(job: JobSpec):
    L = job.lattice_obj()
    mu = job.coset_obj(L)
    collection = job.collection_obj(L.space)
    if not isinstance(collection, chains.CubicalCollection):
        raise InputError("shadow is implemented for cubical collections")
    gate = _gate(job, collection)
    if gate is not None:
        return {"error": "collection is not certified in good position; use --force to override"}, gate
    rows = []
    for u, v in job.tau:
        t = theta.TauPoint(u, v)
        sv = theta.shadow_value(L, mu, collection, t, tol=job.params["tol"], force=True)
        fd = theta.lowering_fd(L, mu, collection, t, h=job.params["h"], tol=job.params["tol"], force=True)
        rows.append({"tau": [u, v], "shadow": sv.to_dict(), "lowering_fd": fd.to_dict(),
                     "abs_diff": abs(sv.value - fd.value), "combined_est_error": sv.est_error + fd.est_error})
    return {"values": rows}, EXIT_OK


def cmd_verify(job: JobSpec):
    results = run_suite(job.params["suite"])
    ok = all(r.passed for r in results)
    return {"suites": [r.to_dict() for r in results], "all_passed": ok}, EXIT_OK if ok else EXIT_REFUTED


COMMANDS = {"check": cmd_check, "phi": cmd_phi, "erf": cmd_erf, "theta": cmd_theta, "shadow": cmd_shadow,
            "verify": cmd_verify}


def _cplx(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="indefinite_theta", description="Indefinite theta series toolkit.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="job file (JSON)")
    ap.add_argument("--tau", action="append", default=None, help="'u,v' (repeatable)")
    ap.add_argument("--N", dest="N", help="exponent cap of the q-expansion")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--mc-samples", dest="mc_samples", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--resolution", help="certification grid step 1/n")
    ap.add_argument("--h", dest="h", type=float, help="finite-difference step for shadow")
    ap.add_argument("--suite", choices=("all",) + SUITES, help="suite for verify")
    ap.add_argument("--force", action="store_true", help="evaluate uncertified collections")
    ap.add_argument("--out", help="write output here instead of stdout")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    return ap


def load_job(args) -> JobSpec:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read job file: {exc}") from exc
    if isinstance(data, dict) and "job" in data:
        data = dict(data["job"])
    data.setdefault("params", {})
    data["params"] = dict(data["params"])
    for key in ("N", "tol", "mc_samples", "seed", "resolution", "h", "suite"):
        val = getattr(args, key, None)
        if val is not None:
            data["params"][key] = val
    if args.force:
        data["params"]["force"] = True
    if args.tau:
        try:
            data["tau"] = [[float(a) for a in t.split(",")] for t in args.tau]
        except ValueError as exc:
            raise InputError(f"bad --tau: {exc}") from exc
    return JobSpec.from_dict(data)


def render(command: str, job: JobSpec, result: dict, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if command == "theta" and "q_expansion" in result:
            w.writerow(["exponent", "coefficient"])
            w.writerows(result["q_expansion"])
        elif command == "verify":
            w.writerow(["suite", "passed", "cases", "worst", "tolerance"])
            for r in result["suites"]:
                w.writerow([r["name"], r["passed"], r["cases"], r["worst"], r["tolerance"]])
        else:
            raise InputError(f"csv output is available for theta and verify, not {command}")
        return buf.getvalue()
    return json.dumps({"command": command, "job": job.to_dict(), "result": result}, indent=2) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = load_job(args)
        result, code = COMMANDS[args.command](job)
        text = render(args.command, job, result, args.format)
    except (InputError, theta.UncertifiedCollectionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (theta.ThetaConvergenceError, QuadratureError) as exc:
        print(f"numerical non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code in (EXIT_REFUTED, EXIT_UNDECIDED) and "error" in result:
        print(result["error"], file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
