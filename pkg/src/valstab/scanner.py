"""Grid scans of the stability threshold over a 2D (or 1D) slice of the
ample cone, with CSV/JSON/matrix output and resumable checkpoints."""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .invariants import polarization, zeta_toric
from .ratgeom import as_fraction, fmt_rational, parse_rational
from .toric import (
    DivisorClass,
    ToricVariety,
    enumerate_valuations,
    is_ample,
    picard_coordinates,
)

__all__ = [
    "SliceSpec", "ScanRecord", "ContinuityReport", "enumerate_valuations",
    "scan_slice", "continuity_report", "write_csv", "write_json", "write_matrix",
    "worker_count",
]

CSV_HEADER = ("a", "b", "ample", "zeta_num", "zeta_den", "min_val", "mu", "s", "stilde", "vol", "ms")


class ScanError(ValueError):
    pass


@dataclass(frozen=True)
class SliceSpec:
    """Classes ``L0 + a H1 + b H2`` for ``(a, b)`` on an ``N x N`` grid of
    intervals over the rectangle (``N + 1`` points per side).  ``H2 = None``
    gives a one-parameter slice."""

    L0: DivisorClass
    H1: DivisorClass
    H2: DivisorClass | None
    a_range: tuple[Fraction, Fraction]
    b_range: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))
    grid: int = 8
    budget: int = 3

    def __post_init__(self):
        if self.grid < 1:
            raise ScanError("grid must have at least one interval")
        if self.budget < 1:
            raise ScanError("budget must be at least 1")
        object.__setattr__(self, "a_range", tuple(as_fraction(x) for x in self.a_range))
        object.__setattr__(self, "b_range", tuple(as_fraction(x) for x in self.b_range))

    @property
    def two_dimensional(self) -> bool:
        return self.H2 is not None and self.b_range[0] != self.b_range[1]

    def axis(self, lo: Fraction, hi: Fraction) -> list[Fraction]:
        return [lo + (hi - lo) * Fraction(i, self.grid) for i in range(self.grid + 1)]

    def points(self) -> list[tuple[int, int, Fraction, Fraction]]:
        a_vals = self.axis(*self.a_range)
        b_vals = self.axis(*self.b_range) if self.two_dimensional else [self.b_range[0]]
        return [(i, j, a, b) for j, b in enumerate(b_vals) for i, a in enumerate(a_vals)]

    def divisor(self, a: Fraction, b: Fraction) -> DivisorClass:
        L = self.L0 + self.H1 * a
        if self.H2 is not None:
            L = L + self.H2 * b
        return L

    def to_dict(self) -> dict:
        q = lambda D: None if D is None else [fmt_rational(c) for c in D.coeffs]
        return {
            "L0": q(self.L0), "H1": q(self.H1), "H2": q(self.H2),
            "a_range": [fmt_rational(x) for x in self.a_range],
            "b_range": [fmt_rational(x) for x in self.b_range],
            "grid": self.grid, "budget": self.budget,
        }


@dataclass(frozen=True)
class ScanRecord:
    i: int
    j: int
    a: Fraction
    b: Fraction
    ample: bool
    zeta: Fraction | None = None
    minimizer: tuple[int, ...] | None = None
    mu: Fraction | None = None
    s: Fraction | None = None
    stilde: Fraction | None = None
    vol: Fraction | None = None
    ms: int = 0
    picard: tuple[Fraction, ...] = ()

    def to_dict(self) -> dict:
        q = lambda x: None if x is None else fmt_rational(x)
        return {
            "i": self.i, "j": self.j, "a": q(self.a), "b": q(self.b), "ample": self.ample,
            "zeta": q(self.zeta),
            "minimizer": None if self.minimizer is None else list(self.minimizer),
            "mu": q(self.mu), "s": q(self.s), "stilde": q(self.stilde), "vol": q(self.vol),
            "ms": self.ms, "picard": [q(c) for c in self.picard],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ScanRecord:
        r = lambda x: None if x is None else parse_rational(x)
        return cls(d["i"], d["j"], r(d["a"]), r(d["b"]), d["ample"], r(d["zeta"]),
                   None if d["minimizer"] is None else tuple(d["minimizer"]),
                   r(d["mu"]), r(d["s"]), r(d["stilde"]), r(d["vol"]), d["ms"],
                   tuple(r(c) for c in d["picard"]))


def worker_count() -> int:
    """Worker processes, from ``VALSTAB_WORKERS`` (default 1)."""
    raw = os.environ.get("VALSTAB_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ScanError(f"VALSTAB_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)


def _evaluate(job) -> ScanRecord:
    X, spec, (i, j, a, b), timing = job
    L = spec.divisor(a, b)
    pic = picard_coordinates(X, L)
    if not is_ample(X, L):
        return ScanRecord(i, j, a, b, False, picard=pic)
    start = time.perf_counter()
    z = zeta_toric(X, L, spec.budget)
    P = polarization(X, L)
    s, st = P.thresholds
    ms = round((time.perf_counter() - start) * 1000) if timing else 0
    return ScanRecord(i, j, a, b, True, z.value, z.minimizer, P.mu, s, st, P.vol, ms, pic)


def _load_checkpoint(path: Path, spec: SliceSpec) -> dict[tuple[int, int], ScanRecord]:
    if not path.exists():
        return {}
    done = {}
    with path.open() as fh:
        header = fh.readline()
        if not header.strip():
            return {}
        if json.loads(header).get("spec") != spec.to_dict():
            raise ScanError(f"checkpoint {path} belongs to a different slice")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rec = ScanRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError):
                break  # truncated tail from an interrupted run
            done[(rec.i, rec.j)] = rec
    return done


def scan_slice(X: ToricVariety, spec: SliceSpec, *, checkpoint: str | Path | None = None,
               workers: int | None = None, timing: bool = False) -> list[ScanRecord]:
    """ζ_toric at every ample grid point, in grid order.

    With ``checkpoint`` every finished record is appended to a JSONL file and
    an interrupted scan resumes from it.
    """
    points = spec.points()
    done: dict[tuple[int, int], ScanRecord] = {}
    ck = Path(checkpoint) if checkpoint is not None else None
    if ck is not None:
        done = _load_checkpoint(ck, spec)
        if not done:
            ck.parent.mkdir(parents=True, exist_ok=True)
            ck.write_text(json.dumps({"spec": spec.to_dict()}, sort_keys=True) + "\n")
        else:
            # rewrite without a possibly truncated tail
            with ck.open("w") as fh:
                fh.write(json.dumps({"spec": spec.to_dict()}, sort_keys=True) + "\n")
                for key in sorted(done, key=lambda k: (k[1], k[0])):
                    fh.write(json.dumps(done[key].to_dict(), sort_keys=True) + "\n")
    todo = [p for p in points if (p[0], p[1]) not in done]
    jobs = [(X, spec, p, timing) for p in todo]
    n = workers if workers is not None else worker_count()
    fh = ck.open("a") if ck is not None else None
    try:
        if n > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=n) as pool:
                results = pool.map(_evaluate, jobs, chunksize=max(1, len(jobs) // (4 * n)))
                for rec in results:
                    done[(rec.i, rec.j)] = rec
                    if fh:
                        fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
        else:
            for job in jobs:
                rec = _evaluate(job)
                done[(rec.i, rec.j)] = rec
                if fh:
                    fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
                    fh.flush()
    finally:
        if fh:
            fh.close()
    records = [done[(p[0], p[1])] for p in points]
    if not any(r.ample for r in records):
        raise ScanError("slice misses ample cone")
    return records


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _q(x) -> str:
    return "" if x is None else fmt_rational(x)


def csv_text(records: Iterable[ScanRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([
            _q(r.a), _q(r.b), int(r.ample),
            "" if r.zeta is None else r.zeta.numerator,
            "" if r.zeta is None else r.zeta.denominator,
            "" if r.minimizer is None else "(" + ",".join(map(str, r.minimizer)) + ")",
            _q(r.mu), _q(r.s), _q(r.stilde), _q(r.vol), r.ms,
        ])
    return buf.getvalue()


def write_csv(path: str | Path, records: Sequence[ScanRecord]) -> None:
    Path(path).write_text(csv_text(records))


def write_json(path: str | Path, X: ToricVariety, spec: SliceSpec,
               records: Sequence[ScanRecord], extra: dict | None = None) -> None:
    data = {"variety": X.to_dict(), "spec": spec.to_dict(),
            "records": [r.to_dict() for r in records]}
    if extra:
        data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _g(x: Fraction | None) -> str:
    return "NaN" if x is None else format(float(x), ".12g")


def write_matrix(path: str | Path, spec: SliceSpec, records: Sequence[ScanRecord]) -> None:
    """gnuplot ``nonuniform matrix``: first row ``N a_0 .. a_N``, then
    ``b_j z_0j .. z_Nj`` per row; non-ample points are NaN."""
    a_vals = spec.axis(*spec.a_range)
    rows: dict[int, list[ScanRecord]] = {}
    for r in records:
        rows.setdefault(r.j, []).append(r)
    lines = [" ".join([str(len(a_vals))] + [_g(a) for a in a_vals])]
    for j in sorted(rows):
        row = sorted(rows[j], key=lambda r: r.i)
        lines.append(" ".join([_g(row[0].b)] + [_g(r.zeta) for r in row]))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# continuity and openness evidence
# ---------------------------------------------------------------------------

@dataclass
class ContinuityReport:
    max_jump: Fraction
    step: Fraction
    lipschitz: Fraction
    flagged_jumps: list[tuple[tuple[int, int], tuple[int, int], Fraction]] = field(default_factory=list)
    refinement_flags: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    homogeneity_pairs: int = 0
    homogeneity_ok: bool = True

    def to_dict(self) -> dict:
        return {
            "max_jump": fmt_rational(self.max_jump),
            "max_jump_float": float(self.max_jump),
            "step": fmt_rational(self.step),
            "lipschitz": fmt_rational(self.lipschitz),
            "flagged_jumps": [[list(p), list(q), fmt_rational(d)] for p, q, d in self.flagged_jumps],
            "refinement_flags": {k: [list(p) for p in v] for k, v in self.refinement_flags.items()},
            "homogeneity_pairs": self.homogeneity_pairs,
            "homogeneity_ok": self.homogeneity_ok,
        }


def _ray_key(coords: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
    lead = abs(next(c for c in coords if c != 0))
    return tuple(c / lead for c in coords)


def continuity_report(records: Sequence[ScanRecord], levels: Sequence = (Fraction(-1, 2), Fraction(-1, 4), 0),
                      modulus=None) -> ContinuityReport:
    """Largest neighbour jump of ζ, refinement flags for ``{ζ > c}`` and an
    exact homogeneity check on proportional grid classes.

    A point with ``ζ > c`` all of whose ample neighbours have ``ζ <= c`` is
    flagged for refinement at level ``c``.
    """
    grid = {(r.i, r.j): r for r in records if r.ample}
    is_2d = len({r.j for r in records}) > 1
    if (is_2d and (len({i for i, _ in grid}) < 2 or len({j for _, j in grid}) < 2 or len(grid) < 4)) \
            or len(grid) < 2:
        raise ScanError("insufficient grid")
    ordered = sorted(records, key=lambda r: (r.j, r.i))
    a_step = _axis_step([r.a for r in ordered if r.j == ordered[0].j])
    b_step = _axis_step(sorted({r.b for r in records})) if is_2d else None
    step = min(x for x in (a_step, b_step) if x is not None)

    max_jump = Fraction(0)
    lip = Fraction(0)
    flagged = []
    for (i, j), r in sorted(grid.items()):
        for (di, dj), h in (((1, 0), a_step), ((0, 1), b_step)):
            nb = grid.get((i + di, j + dj))
            if nb is None:
                continue
            d = abs(nb.zeta - r.zeta)
            max_jump = max(max_jump, d)
            lip = max(lip, d / h)
            if modulus is not None and d > as_fraction(modulus):
                flagged.append(((i, j), (i + di, j + dj), d))

    flags = {}
    for c in levels:
        c = as_fraction(c)
        hits = []
        for (i, j), r in sorted(grid.items()):
            if r.zeta <= c:
                continue
            nbs = [grid.get((i + di, j + dj)) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))]
            nbs = [x for x in nbs if x is not None]
            if nbs and all(x.zeta <= c for x in nbs):
                hits.append((i, j))
        flags[str(c)] = hits

    pairs = 0
    ok = True
    base: dict[tuple, ScanRecord] = {}
    for r in sorted(grid.values(), key=lambda r: (r.j, r.i)):
        key = _ray_key(r.picard)
        ref = base.setdefault(key, r)
        if ref is r:
            continue
        nz = [(x, y) for x, y in zip(r.picard, ref.picard) if y != 0]
        k = nz[0][0] / nz[0][1]
        pairs += 1
        if r.zeta * k != ref.zeta:
            ok = False
    return ContinuityReport(max_jump, step, lip, flagged, flags, pairs, ok)


def _axis_step(values: Sequence[Fraction]) -> Fraction | None:
    values = sorted(set(values))
    if len(values) < 2:
        return None
    return values[1] - values[0]
