"""``germlab``: batch experiment runner (config in, CSV/JSON tables out).

Exit codes: 0 all checks pass, 1 scientific disagreement, 2 usage or
instability error.  Every option can also come from a JSON config given
with ``--config``; command-line flags win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from .localfield import EQUAL, MIXED, ORDERED_CLASSES, FieldSpec, LocalFieldError, PrecisionError, SquareClass

EXIT_OK, EXIT_DISAGREE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def fr(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def _spec(args) -> FieldSpec:
    kind = {"qp": MIXED, "fpt": EQUAL}[args.field]
    return FieldSpec(kind, args.p, args.precision)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fr(x) if isinstance(x, Fraction) else x for x in r])
    return buf.getvalue()


def _emit(args, text: str, verdict: str) -> None:
    body = text if text.endswith("\n") else text + "\n"
    sys.stdout.write(body)
    sys.stdout.write(verdict + "\n")
    if args.out:
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        Path(args.out).write_text(f"# germlab {args.command} {stamp}\n" + body, encoding="utf-8")


def _a_range(args) -> range:
    return range(args.a0, args.a0 + args.a_span + 1)


# --- subcommands ----------------------------------------------------------------------


def cmd_orbits(args) -> int:
    from .rootdata import nilpotent_class_bound, sl2_datum
    from .sl2germs import ALL_ORBITS, classify_nilpotents_bruteforce

    spec = _spec(args)
    reps = classify_nilpotents_bruteforce(spec, args.depth)
    rows = [(o.label, str(o.representative(spec))) for o in ALL_ORBITS]
    bound = nilpotent_class_bound(sl2_datum(), spec.p)
    text = _csv(["orbit", "representative"], rows)
    ok = len(reps) == bound
    _emit(args, text, f"brute-force classes at depth {args.depth}: {len(reps)}; bound {bound}; {'match' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_DISAGREE


def cmd_theta(args) -> int:
    from .sl2germs import barbasch_moy_tuple, theta_matrix

    spec = _spec(args)
    ups = barbasch_moy_tuple(args.k, spec, search_depth=min(args.depth, 2))
    if len(ups) == 0:
        raise UsageError(f"k = {args.k} exceeds the number of nilpotent orbits")
    theta = theta_matrix(ups)
    labels = [f"{pr.orbit.label}@{pr.f.value}" for pr in ups]
    rows = [[labels[j]] + row for j, row in enumerate(theta.rows())]
    text = _csv(["test function"] + [pr.orbit.label for pr in ups], rows)
    tri = theta.is_upper_triangular() and all(x != 0 for x in theta.diagonal())
    _emit(args, text, f"triangular: {'yes' if tri else 'no'}; det = {fr(theta.det())}")
    return EXIT_OK if tri else EXIT_DISAGREE


def cmd_germs(args) -> int:
    from .sl2germs import germ_expansion_residual, sample_regular, shalika_germs, standard_theta

    spec = _spec(args)
    theta = standard_theta(spec)
    rng = random.Random(args.seed)
    rows = []
    ok = True
    for cls in ORDERED_CLASSES:
        for a in _a_range(args):
            if (a % 2 == 1) != cls.odd or a < 1:
                continue
            for _ in range(args.samples):
                X = sample_regular(spec, rng, cls, a)
                t = shalika_germs(X, theta)
                ok &= not any(germ_expansion_residual(t, theta))
                rows.append([cls.value, a] + list(t.germs))
    text = _csv(["-D class", "ord D"] + list(theta.tuple_.labels), rows)
    _emit(args, text, f"germ expansion identity: {'exact' if ok else 'FAILED'} on {len(rows)} samples")
    return EXIT_OK if ok else EXIT_DISAGREE


def cmd_kappa_match(args) -> int:
    from .endoscopy import EndoscopicDatumRank1, local_matching_check, reverify
    from .sl2germs import standard_tuple

    spec = _spec(args)
    datum = EndoscopicDatumRank1.split() if args.tau == "1" else EndoscopicDatumRank1.elliptic(args.tau)
    ups = standard_tuple(spec)
    rep = local_matching_check(ups, datum, spec, _a_range(args), samples=args.samples, seed=args.seed,
                               flip=args.negative_control)
    out = rep.to_json()
    if rep.success:
        shifted = range(args.a0 + 1, args.a0 + args.a_span + 2)
        out["reverified"] = reverify(rep, ups, spec, shifted, samples=args.samples, seed=args.seed + 1)
    _emit(args, json.dumps(out, indent=2), f"match: {'found' if rep.success else 'none'}")
    return EXIT_OK if rep.success and out.get("reverified", False) else EXIT_DISAGREE


def cmd_ak_compare(args) -> int:
    from .integrate import ak_compare

    reports = ak_compare(args.p, args.depth)
    rows = [r.record() for r in reports]
    text = _csv(["label", "p", "depth", "value_mixed", "value_equal", "agree"],
                [[r["label"], r["p"], r["depth"], r["value_mixed"], r["value_equal"], r["agree"]] for r in rows])
    ok = all(r.agree for r in reports)
    _emit(args, text, f"agree: {'yes' if ok else 'no'} ({sum(r.agree for r in reports)}/{len(reports)})")
    return EXIT_OK if ok else EXIT_DISAGREE


def cmd_presburger(args) -> int:
    from .presburger import PiecewiseExpPoly, format_exppoly, is_eventually_zero, parse_exppoly, uniform_tail_bound, zero_set_bounded

    if not args.expr:
        raise UsageError("presburger needs --expr")
    f = parse_exppoly(args.expr)
    a0 = uniform_tail_bound(f, args.q)
    hi = a0 + args.scan
    zeros = zero_set_bounded(f, args.q, 0, hi)
    tail_empty = not any(t >= a0 for t in zeros)
    rows = [[format_exppoly(f), args.q, a0, " ".join(map(str, zeros)), is_eventually_zero(PiecewiseExpPoly.on_ray(f))]]
    text = _csv(["expr", "q", "tail bound", "zeros in scan", "eventually zero"], rows)
    _emit(args, text, f"tail bound certified on [{a0}, {hi}]: {'yes' if tail_empty else 'no'}")
    return EXIT_OK if tail_empty else EXIT_DISAGREE


def cmd_parahorics(args) -> int:
    from .rootdata import builtin_fixed_choices, parahoric_index_set

    table = builtin_fixed_choices()
    if args.type not in table:
        raise UsageError(f"unknown type {args.type}; known: {', '.join(sorted(table))}")
    F = parahoric_index_set(table[args.type], reading=args.reading)
    _emit(args, json.dumps(F.to_dict()), f"|F| = {len(F.elements)}")
    return EXIT_OK


COMMANDS = {
    "orbits": cmd_orbits,
    "theta": cmd_theta,
    "germs": cmd_germs,
    "kappa-match": cmd_kappa_match,
    "ak-compare": cmd_ak_compare,
    "presburger": cmd_presburger,
    "parahorics": cmd_parahorics,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="germlab", description="p-adic Shalika germ and rank-1 endoscopy lab")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON config supplying defaults")
        sp.add_argument("--p", type=int, default=None)
        sp.add_argument("--field", choices=["qp", "fpt"], default=None)
        sp.add_argument("--depth", type=int, default=None)
        sp.add_argument("--precision", type=int, default=None)
        sp.add_argument("--k", type=int, default=None)
        sp.add_argument("--a0", type=int, default=None)
        sp.add_argument("--a-span", dest="a_span", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--out", type=str, default=None)
        if name == "kappa-match":
            sp.add_argument("--tau", choices=["1", "u", "pi", "upi"], default=None)
            sp.add_argument("--negative-control", dest="negative_control", action="store_true", default=None)
        if name == "presburger":
            sp.add_argument("--expr", type=str, default=None)
            sp.add_argument("--q", type=int, default=None)
            sp.add_argument("--scan", type=int, default=None)
        if name == "parahorics":
            sp.add_argument("--type", type=str, default=None)
            sp.add_argument("--reading", choices=["literal", "rectangle"], default=None)
    return ap


DEFAULTS = {
    "p": 5, "field": "qp", "depth": 3, "precision": 24, "k": 5, "a0": 2, "a_span": 3, "seed": 0, "samples": 2,
    "out": None, "tau": "u", "negative_control": False, "expr": None, "q": 5, "scan": 500, "type": "A1",
    "reading": "literal",
}
SAMPLED = {"germs", "kappa-match"}


def _resolve(args) -> argparse.Namespace:
    cfg = {}
    if args.config is not None:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config: {e}") from e
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        unknown = set(cfg) - set(DEFAULTS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if cfg.get("command", args.command) != args.command:
            raise UsageError("config command does not match the subcommand")
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, cfg.get(key, default))
    if args.command in SAMPLED and args.config is not None and "seed" not in cfg and "--seed" not in sys.argv:
        raise UsageError("sampled experiments need a seed in the config")
    if args.p is None or args.p < 3:
        raise UsageError("--p must be an odd prime")
    return args


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        args = _resolve(args)
        return COMMANDS[args.command](args)
    except (UsageError, LocalFieldError, ValueError) as e:
        sys.stderr.write(f"germlab: {e}\n")
        return EXIT_USAGE
    except (PrecisionError, RuntimeError) as e:
        sys.stderr.write(f"germlab: instability: {e}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
