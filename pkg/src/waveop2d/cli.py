"""Configuration-driven pipeline: classify, bound sweeps, report bundle.

All artifacts for one config land in a single output directory and begin
with a provenance header (tool version + config hash).  `classify` must
run before the potential-dependent sweeps (`bounds swave / d3 / error`),
which reuse its resolved coupling instead of re-bisecting; the purely
kernel-level sweeps (`Js / Jpp / Jp / lp-kernels / bracket`) run
standalone.  Exit codes: 0 ok, 1 bad config, 2 classification
uncertain, 3 missing prerequisite artifact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass

from . import __version__, discretize, kernelbounds, operators, oscint, waveop


class ConfigError(Exception):
    """Bad or incomplete run configuration."""


class PrerequisiteError(Exception):
    """A required earlier pipeline artifact is absent or stale."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_REQUIRED = object()
_SECTIONS = ("potential", "grid", "lambda", "tolerances", "sweep", "output")
_BOUND_TARGETS = ("Js", "Jpp", "Jp", "lp-kernels", "bracket",
                  "swave", "d3", "error")


@dataclass
class RunConfig:
    family: str
    coupling_spec: str            # float literal or "critical:<k>"
    beta: float
    radius: float
    n_r: int
    n_theta: int
    lambda1: float
    rank_tol: float
    quad_tol: float
    bound_eps: float
    n_osc: int                    # (r, s) grid side for the lambda-integral sweeps
    n_radii: int                  # radii per axis in the term sweeps
    n_angles: int
    sweep_lo: float
    sweep_hi: float
    out_dir: str
    jobs: int = 1
    sha: str = ""

    def canonical(self) -> str:
        """Normalized settings text; its hash identifies the run numerically.

        Output directory and job count are plumbing, not numerics, and
        stay out of the hash.
        """
        pairs = (
            ("family", self.family),
            ("coupling", self.coupling_spec),
            ("beta", "%.17g" % self.beta),
            ("radius", "%.17g" % self.radius),
            ("n_r", "%d" % self.n_r),
            ("n_theta", "%d" % self.n_theta),
            ("lambda1", "%.17g" % self.lambda1),
            ("rank_tol", "%.17g" % self.rank_tol),
            ("quad_tol", "%.17g" % self.quad_tol),
            ("bound_eps", "%.17g" % self.bound_eps),
            ("n_osc", "%d" % self.n_osc),
            ("n_radii", "%d" % self.n_radii),
            ("n_angles", "%d" % self.n_angles),
            ("sweep_lo", "%.17g" % self.sweep_lo),
            ("sweep_hi", "%.17g" % self.sweep_hi),
        )
        return "".join(f"{k}={v}\n" for k, v in pairs)


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Flat `key = value` lines under `[section]` headers -> nested dict."""
    sections: dict = {}
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _SECTIONS:
                raise ConfigError(f"{origin}:{ln}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(
                f"{origin}:{ln}: expected `key = value`, got {raw.strip()!r}")
        if current is None:
            raise ConfigError(f"{origin}:{ln}: key outside any [section]")
        key, val = (t.strip() for t in line.split("=", 1))
        if not key:
            raise ConfigError(f"{origin}:{ln}: empty key")
        sections[current][key.lower()] = val
    return sections


def _pull(sections: dict, section: str, key: str, conv, default=_REQUIRED):
    sec = sections.get(section, {})
    if key not in sec:
        if default is _REQUIRED:
            raise ConfigError(
                f"missing required key `{key}` in section [{section}]")
        return default
    raw = sec[key]
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _coupling_spec(raw: str) -> str:
    raw = raw.strip()
    if raw.startswith("critical:"):
        k = int(raw.split(":", 1)[1])
        if k < 1:
            raise ValueError("critical:<k> needs k >= 1")
        return f"critical:{k}"
    float(raw)                     # literal coupling; must parse
    return raw


def _validate(cfg: RunConfig) -> None:
    try:
        discretize.PotentialSpec(cfg.family, coupling=1.0, beta=cfg.beta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.radius <= 1.0:
        raise ConfigError("grid radius must exceed 1")
    if cfg.n_r < 2 or cfg.n_theta < 4:
        raise ConfigError("need n_r >= 2 and n_theta >= 4")
    if not 0.0 < cfg.lambda1 < 0.5:
        raise ConfigError("lambda1 must lie in (0, 1/2)")
    for name in ("rank_tol", "quad_tol", "bound_eps"):
        if getattr(cfg, name) <= 0.0:
            raise ConfigError(f"{name} must be positive")
    if cfg.n_osc < 2 or cfg.n_radii < 2 or cfg.n_angles < 1:
        raise ConfigError("sweep grid sizes too small")
    if not 0.0 < cfg.sweep_lo < cfg.sweep_hi:
        raise ConfigError("need 0 < sweep lo < hi")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")


def load_config(path: str, *, out=None, lambda1=None, tol=None,
                jobs=None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    sec = parse_config_text(text, origin=os.path.basename(path))
    cfg = RunConfig(
        family=_pull(sec, "potential", "family", str),
        coupling_spec=_pull(sec, "potential", "coupling", _coupling_spec),
        beta=_pull(sec, "potential", "beta", float),
        radius=_pull(sec, "grid", "radius", float),
        n_r=_pull(sec, "grid", "n_r", int),
        n_theta=_pull(sec, "grid", "n_theta", int),
        lambda1=_pull(sec, "lambda", "lambda1", float),
        rank_tol=_pull(sec, "tolerances", "rank_tol", float,
                       operators.RANK_RTOL),
        quad_tol=_pull(sec, "tolerances", "quad_tol", float, 1e-8),
        bound_eps=_pull(sec, "tolerances", "bound_eps", float,
                        oscint.BOUND_EPS),
        n_osc=_pull(sec, "sweep", "n_osc", int, 16),
        n_radii=_pull(sec, "sweep", "n_radii", int, 6),
        n_angles=_pull(sec, "sweep", "n_angles", int, 6),
        sweep_lo=_pull(sec, "sweep", "lo", float, 0.5),
        sweep_hi=_pull(sec, "sweep", "hi", float, 80.0),
        out_dir=_pull(sec, "output", "dir", str, "waveop2d_out"),
    )
    if out is not None:
        cfg.out_dir = out
    if lambda1 is not None:
        cfg.lambda1 = lambda1
    if tol is not None:
        cfg.rank_tol = tol
    if jobs is not None:
        cfg.jobs = jobs
    _validate(cfg)
    cfg.sha = hashlib.sha256(cfg.canonical().encode("utf-8")).hexdigest()
    return cfg


# ---------------------------------------------------------------------------
# artifact plumbing
# ---------------------------------------------------------------------------


def _header(cfg: RunConfig) -> str:
    return f"# waveop2d {__version__}\n# config sha256: {cfg.sha}\n"


def _artifact(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, name)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _read_json_artifact(path: str) -> dict:
    """Load a JSON artifact, skipping the `#` provenance header lines."""
    with open(path, "r", encoding="utf-8") as fh:
        body = "".join(ln for ln in fh if not ln.startswith("#"))
    return json.loads(body)


def _grid_and_base(cfg: RunConfig):
    grid = discretize.build_polar_grid(cfg.radius, n_r=cfg.n_r,
                                       n_theta=cfg.n_theta)
    base = discretize.PotentialSpec(cfg.family, coupling=1.0, beta=cfg.beta)
    return grid, base


def _load_classify(cfg: RunConfig, needed_by: str) -> dict:
    path = _artifact(cfg, "classify.json")
    if not os.path.exists(path):
        raise PrerequisiteError(
            f"`bounds {needed_by}` needs {path}; "
            "run `waveop2d classify --config ...` first")
    data = _read_json_artifact(path)
    if data.get("config_sha256") != cfg.sha:
        raise PrerequisiteError(
            "classify.json was produced from a different config; "
            "re-run `waveop2d classify`")
    return data


def _tuned_hminus(cfg: RunConfig):
    """h^-(lambda) from the classify artifact, if one matches the config."""
    path = _artifact(cfg, "classify.json")
    if not os.path.exists(path):
        return None
    data = _read_json_artifact(path)
    if data.get("config_sha256") != cfg.sha:
        return None
    hm = data.get("h_minus")
    if not hm:
        return None
    return lambda lam: operators.h_coefficient(lam, -1, hm["vnorm_sq"],
                                               hm["b"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_classify(cfg: RunConfig, args) -> int:
    grid, base = _grid_and_base(cfg)
    bisect = None
    if cfg.coupling_spec.startswith("critical:"):
        k = int(cfg.coupling_spec.split(":", 1)[1])
        cc = operators.critical_coupling(base, grid, k)
        coupling = cc.c_star
        bisect = {"target_pos": k, "bracket": list(cc.bracket),
                  "iterations": cc.iterations}
    else:
        coupling = float(cfg.coupling_spec)
    pot = discretize.sample_potential(base.with_coupling(coupling), grid)
    _, report = operators.classify_potential(pot, grid, tol=cfg.rank_tol)
    resid = operators.inversion_identity_residual(report, cfg.lambda1 / 2.0)

    internals = report.internals
    hm = None
    if internals.get("b") is not None:
        hm = {"vnorm_sq": float(internals["vnorm_sq"]),
              "b": float(internals["b"])}

    payload = {
        "tool": "waveop2d",
        "version": __version__,
        "config_sha256": cfg.sha,
        "coupling_spec": cfg.coupling_spec,
        "coupling": coupling,
        "bisection": bisect,
        "h_minus": hm,
        "inversion_residual": resid,
        "report": report.to_json_dict(),
    }
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write(_artifact(cfg, "classify.json"),
           _header(cfg) + json.dumps(payload, indent=1, sort_keys=True) + "\n")

    lines = [
        "kind: %s" % report.kind,
        "certified: %s" % report.certified,
        "coupling: %.17g" % coupling,
        "rank_S1: %d" % report.rank_S1,
        "rank_S3: %d" % report.rank_S3,
        "smallest_sv_QTQ: %.6e" % report.smallest_sv_QTQ,
        "sv_scale: %.6e" % report.sv_scale,
        "gap_ratio: %.6g" % report.gap_ratio,
        "inversion_residual: %.6e (quad_tol %.1e)" % (resid, cfg.quad_tol),
    ]
    if bisect is not None:
        lines.append("bisection: target_pos=%d iterations=%d"
                     % (bisect["target_pos"], bisect["iterations"]))
    if hm is not None:
        lines.append("h_minus: vnorm_sq=%.12g b=%.12g"
                     % (hm["vnorm_sq"], hm["b"]))
    for e in report.eigenfunctions:
        lines.append("eigenfunction: moment0=%.3e moment_x=%.3e "
                     "moment_y=%.3e decay=%.3f residual=%.3e"
                     % (e.moment0, e.moment_x, e.moment_y,
                        e.decay_exponent, e.residual))
    _write(_artifact(cfg, "classify.txt"),
           _header(cfg) + "\n".join(lines) + "\n")
    print("classify: kind=%s certified=%s -> %s"
          % (report.kind, report.certified, _artifact(cfg, "classify.txt")))
    return 0


_POT_KIND = {"swave": "SWaveResonance", "d3": "EigenvalueOnly", "error": None}


def _classified_problem(cfg: RunConfig, which: str):
    """Rebuild pot/grid at the artifact coupling and re-derive internals.

    The JSON artifact stores only the serializable report; the projection
    internals are recomputed deterministically from the stored coupling.
    """
    art = _load_classify(cfg, which)
    want = _POT_KIND[which]
    kind = art["report"]["kind"]
    if want is not None and kind != want:
        raise PrerequisiteError(
            f"`bounds {which}` needs a {want} classification but "
            f"classify.json records {kind}; run `waveop2d classify` on a "
            "config tuned for that threshold type")
    grid, base = _grid_and_base(cfg)
    pot = discretize.sample_potential(base.with_coupling(art["coupling"]),
                                      grid)
    _, report = operators.classify_potential(pot, grid, tol=cfg.rank_tol)
    if report.kind != kind:
        raise PrerequisiteError(
            "stored classification no longer reproduces at the stored "
            "coupling; re-run `waveop2d classify`")
    return pot, grid, report


def _lp_kernel_results(cfg: RunConfig):
    rows, extra = [], []
    for K in (kernelbounds.k1_kernel(), kernelbounds.k2_kernel()):
        rep = kernelbounds.lp_kernel_lemma_check(K)
        base, dbl = rep.radii[0], rep.radii[-1]
        for p in rep.p_values:
            n0 = rep.norms[(p, base)]
            n1 = rep.norms[(p, dbl)]
            rel = abs(n1 - n0) / n0
            rows.append((f"{rep.kernel} p={p:g}", n1, n0,
                         "pass" if rel < 0.10 else "FAIL"))
        d2 = rep.norms[(2.0, base)]
        rows.append((f"{rep.kernel} svd p=2", d2, rep.svd2[base],
                     "pass" if d2 <= rep.svd2[base] * (1.0 + 1e-9)
                     else "FAIL"))
        extra.append("%s: max_rel_change=%.4g%% stable=%s"
                     % (rep.kernel, 100.0 * rep.max_rel_change, rep.stable))
    ok = all(r[3] == "pass" for r in rows)
    return rows, extra, ok


def _bracket_results():
    rows = []
    worst = 0.0
    for a in (1.5, 2.5, 3.0):
        for b in (1.5, 2.5, 3.0):
            rep = kernelbounds.bracket_decay_check(a, b)
            worst = max(worst, abs(rep.fitted - rep.expected))
            rows.append((f"alpha={a:g} beta={b:g}", rep.fitted, rep.expected,
                         "pass" if rep.ok else "FAIL"))
    ok = all(r[3] == "pass" for r in rows)
    return rows, worst, ok


def cmd_bounds(cfg: RunConfig, args) -> int:
    which = args.which
    os.makedirs(cfg.out_dir, exist_ok=True)
    extra: list = []
    if which in ("Js", "Jpp", "Jp"):
        sweep = oscint.bound_sweep(which, n=cfg.n_osc,
                                   cutoff=oscint.CutoffSpec(cfg.lambda1),
                                   hminus=_tuned_hminus(cfg),
                                   eps=cfg.bound_eps)
        ok = math.isfinite(sweep.C)
        summary = ("summary: C=%.6g at (r=%.4g, s=%.4g) grid=%dx%d %s"
                   % (sweep.C, sweep.argmax[0], sweep.argmax[1],
                      cfg.n_osc, cfg.n_osc, "pass" if ok else "FAIL"))
        csv = sweep.to_csv()
    elif which == "lp-kernels":
        rows, extra, ok = _lp_kernel_results(cfg)
        summary = ("summary: K1/K2 p-norm stability for p in {1, 2, 8} "
                   "under domain doubling %s" % ("pass" if ok else "FAIL"))
        csv = kernelbounds.reports_to_csv(rows)
    elif which == "bracket":
        rows, worst, ok = _bracket_results()
        summary = ("summary: worst |fitted-expected|=%.4f over %d "
                   "(alpha, beta) pairs %s"
                   % (worst, len(rows), "pass" if ok else "FAIL"))
        csv = kernelbounds.reports_to_csv(rows)
    elif which == "swave":
        pot, grid, report = _classified_problem(cfg, which)
        rep = waveop.swave_bound_check(
            pot, grid, report, lambda1=cfg.lambda1, n_radii=cfg.n_radii,
            n_angles=cfg.n_angles, lo=cfg.sweep_lo, hi=cfg.sweep_hi)
        ok = rep.sweep.finite and rep.stable
        summary = ("summary: C=%.6g decay=%.3f rowsup=(%.6g, %.6g) "
                   "stable=%s %s"
                   % (rep.sweep.ratio_sup, rep.decay_rate, rep.row_sups[0],
                      rep.row_sups[1], rep.stable, "pass" if ok else "FAIL"))
        extra = ["argmax: x=%.6g angle=%.6g y=%.6g" % rep.sweep.argmax]
        csv = rep.sweep.to_csv()
    elif which == "d3":
        pot, grid, report = _classified_problem(cfg, which)
        rep = waveop.d3_bound_check(
            pot, grid, report, lambda1=cfg.lambda1, n_radii=cfg.n_radii,
            n_angles=cfg.n_angles, lo=cfg.sweep_lo, hi=cfg.sweep_hi)
        ok = (rep.sweep.finite and rep.moment_residual <= 1e-7
              and rep.geometric_sup <= 0.5 + 1e-6)
        summary = ("summary: C=%.6g decay=%.3f moment_resid=%.3e "
                   "geom_sup=%.6f %s"
                   % (rep.sweep.ratio_sup, rep.decay_rate,
                      rep.moment_residual, rep.geometric_sup,
                      "pass" if ok else "FAIL"))
        extra = ["argmax: x=%.6g angle=%.6g y=%.6g" % rep.sweep.argmax]
        csv = rep.sweep.to_csv()
    else:                          # error term
        pot, grid, report = _classified_problem(cfg, which)
        rep = waveop.error_term_check(
            pot, grid, report, lambda1=cfg.lambda1, n_radii=cfg.n_radii,
            n_angles=cfg.n_angles, lo=cfg.sweep_lo, hi=cfg.sweep_hi)
        ok = (rep.sweep.finite and rep.decay_rate >= 2.0
              and rep.g_bound_sups[0] <= 1.0 and rep.derivative_check.passed)
        summary = ("summary: C=%.6g decay=%.3f g0_sup=%.4g deriv=%s %s"
                   % (rep.sweep.ratio_sup, rep.decay_rate,
                      rep.g_bound_sups[0], rep.derivative_check.passed,
                      "pass" if ok else "FAIL"))
        extra = ["g_sups: j0=%.6g j1=%.6g j2=%.6g (only j=0 gated)"
                 % rep.g_bound_sups,
                 "deriv_slopes: %s"
                 % " ".join("%.3f" % s for s in rep.derivative_check.slopes),
                 "argmax: x=%.6g angle=%.6g y=%.6g" % rep.sweep.argmax]
        csv = rep.sweep.to_csv()

    stem = "bounds_" + which.replace("-", "_")
    _write(_artifact(cfg, stem + ".csv"), _header(cfg) + csv)
    _write(_artifact(cfg, stem + ".txt"),
           _header(cfg) + "\n".join([summary] + extra) + "\n")
    print("%s -> %s" % (summary, _artifact(cfg, stem + ".txt")))
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    entries = []
    cpath = _artifact(cfg, "classify.json")
    if os.path.exists(cpath):
        data = _read_json_artifact(cpath)
        rep = data["report"]
        entries.append(("classify", "kind=%s certified=%s coupling=%.17g"
                        % (rep["kind"], rep["certified"], data["coupling"])))
    names = sorted(os.listdir(cfg.out_dir)) if os.path.isdir(cfg.out_dir) \
        else []
    for name in names:
        if not (name.startswith("bounds_") and name.endswith(".txt")):
            continue
        with open(_artifact(cfg, name), "r", encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("summary: "):
                    entries.append((name[:-4], line.strip()[len("summary: "):]))
                    break
    if not entries:
        raise PrerequisiteError(
            f"no artifacts in {cfg.out_dir}; run `waveop2d classify` and "
            "`waveop2d bounds <which>` first")
    lines = [
        "generated: %s" % time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "tool: waveop2d %s" % __version__,
        "config_sha256: %s" % cfg.sha,
        "potential: family=%s coupling=%s beta=%r"
        % (cfg.family, cfg.coupling_spec, cfg.beta),
        "grid: radius=%r n_r=%d n_theta=%d"
        % (cfg.radius, cfg.n_r, cfg.n_theta),
        "lambda1: %r" % cfg.lambda1,
        "artifacts: %d" % len(entries),
    ] + ["%s: %s" % e for e in entries]
    _write(_artifact(cfg, "manifest.txt"),
           _header(cfg) + "\n".join(lines) + "\n")
    print("report: %d artifacts -> %s"
          % (len(entries), _artifact(cfg, "manifest.txt")))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="waveop2d",
        description="Threshold classification and wave-operator bound "
                    "sweeps for 2D Schrodinger operators.")
    ap.add_argument("--version", action="version",
                    version="waveop2d " + __version__)
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", required=True, metavar="PATH",
                        help="run configuration file")
    shared.add_argument("--out", metavar="DIR",
                        help="output directory (default from config)")
    shared.add_argument("--jobs", type=int, metavar="N",
                        help="worker hint; current modules are serial")
    shared.add_argument("--lambda1", type=float, metavar="V",
                        help="override the low-energy cutoff scale")
    shared.add_argument("--tol", type=float, metavar="V",
                        help="override the rank-detection tolerance")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("classify", parents=[shared],
                       help="resolve the coupling and classify the "
                            "zero-energy threshold")
    p.set_defaults(func=cmd_classify)
    p = sub.add_parser("bounds", parents=[shared],
                       help="run one bound sweep and write CSV + summary")
    p.add_argument("which", choices=_BOUND_TARGETS)
    p.set_defaults(func=cmd_bounds)
    p = sub.add_parser("report", parents=[shared],
                       help="merge artifact summaries into manifest.txt")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, out=args.out, lambda1=args.lambda1,
                          tol=args.tol, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(cfg, args)
    except operators.ClassificationUncertain as exc:
        print(f"classification uncertain: {exc}", file=sys.stderr)
        return 2
    except PrerequisiteError as exc:
        print(f"missing prerequisite: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
