"""Command-line entry point: ``popsynth <command> ...``.

Exit codes: 0 success, 2 input error, 3 feasibility error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import io as popio
from .engine import FeasibilityError, Heuristics, synthesize_sa2
from .engine.synthesize import sa2_rng
from .ingest import (
    AGE_FILE,
    HOUSEHOLD_FILE,
    PERSON_FILE,
    AgePyramid,
    HouseholdMarginal,
    InputError,
    PersonMarginal,
    clean,
    parse_age_pyramid,
    parse_household_marginal,
    parse_person_marginal,
    read_input_dir,
    write_age_pyramids,
    write_clean_reports,
    write_household_marginals,
    write_person_marginals,
)
from .metrics import compare_sa2, write_report

log = logging.getLogger("popsynth")

EXIT_OK, EXIT_INPUT, EXIT_FEASIBILITY = 0, 2, 3

SA1_FILE = "sa1_marginal.csv"
POLYGON_FILE = "sa1_polygons.geojson"
ADDRESS_FILE = "addresses.csv"


class CliInputError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliInputError(f"{p}: no such file or directory")
    return p


# -- clean ---------------------------------------------------------------------

def cmd_clean(args) -> int:
    persons = parse_person_marginal(_existing(args.persons))
    households = parse_household_marginal(_existing(args.households))
    ages = parse_age_pyramid(_existing(args.ages))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cleaned_p, cleaned_a, reports = [], [], []
    for sa2 in sorted(set(persons) | set(households) | set(ages)):
        p = persons.get(sa2, PersonMarginal(sa2))
        h = households.get(sa2, HouseholdMarginal(sa2))
        cp, ca, rep = clean(p, h, ages.get(sa2, AgePyramid(sa2)), args.eight_plus_surplus)
        cleaned_p.append(cp)
        cleaned_a.append(ca)
        reports.append(rep)
    write_person_marginals(out / PERSON_FILE, cleaned_p)
    write_household_marginals(out / HOUSEHOLD_FILE, households.values())
    write_age_pyramids(out / AGE_FILE, cleaned_a)
    write_clean_reports(out / "clean_report.csv", reports)
    changed = sum(not r.is_empty for r in reports)
    log.info("cleaned %d SA2s, %d adjusted", len(reports), changed)
    return EXIT_OK


# -- synthesize ----------------------------------------------------------------

@dataclass
class SA2Result:
    sa2: str
    status: str
    persons: int = 0
    households: int = 0
    elapsed_ms: float = 0.0
    fallbacks: str = ""
    chunks: tuple[str, str, str] = ("", "", "")
    feasibility: bool = False


def run_sa2(task) -> SA2Result:
    """Clean and synthesize one SA2; never raises for per-SA2 problems."""
    p, h, a, heuristics = task
    sa2 = h.sa2
    try:
        cp, ca, _ = clean(p, h, a, heuristics.eight_plus_surplus)
        pop = synthesize_sa2(cp, h, ca, heuristics)
    except FeasibilityError as exc:
        return SA2Result(sa2, f"failed: {exc}", feasibility=True)
    except InputError as exc:
        return SA2Result(sa2, f"failed: {exc}", feasibility=True)
    rep = pop.report
    fb = ";".join(f"{k}={v}" for k, v in sorted(rep.fallbacks.items()))
    status = "ok" if pop.households else "empty"
    return SA2Result(sa2, status, len(pop.persons), len(pop.households), rep.elapsed_ms, fb,
                     popio.render_population(pop))


def heuristics_from(args) -> Heuristics:
    return Heuristics(
        parent_child_gap_min=args.gap_min,
        parent_child_gap_max=args.gap_max,
        couple_partner_bins=tuple(args.partner_offsets),
        nonprimary_couple_child_prob=args.couple_child_prob,
        rng_seed=args.seed,
        max_retries=args.max_retries,
        eight_plus_surplus=args.eight_plus_surplus,
    )


def cmd_synthesize(args) -> int:
    try:
        heuristics = heuristics_from(args)
    except ValueError as exc:
        raise CliInputError(str(exc)) from None
    persons, households, ages = read_input_dir(_existing(args.input))
    codes = sorted(set(persons) | set(households))
    if args.sa2:
        wanted = set(args.sa2)
        missing = wanted - set(codes)
        if missing:
            raise CliInputError(f"SA2 codes not in the input: {', '.join(sorted(missing))}")
        codes = [c for c in codes if c in wanted]
    tasks = [(persons.get(c, PersonMarginal(c)), households.get(c, HouseholdMarginal(c)),
              ages.get(c, AgePyramid(c)), heuristics) for c in codes]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = []

    def chunks(stream):
        for r in stream:
            results.append(r)
            if r.feasibility:
                log.error("SA2 %s %s", r.sa2, r.status)
            yield r.chunks

    threads = max(1, args.threads)
    if threads == 1 or len(tasks) <= 1:
        popio.write_population(out, chunks(map(run_sa2, tasks)))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            popio.write_population(out, chunks(pool.map(run_sa2, tasks, chunksize=1)))

    with open(out / "run_report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sa2", "status", "persons", "households", "elapsed_ms", "fallbacks"])
        for r in results:
            w.writerow([r.sa2, r.status, r.persons, r.households, f"{r.elapsed_ms:.1f}",
                        r.fallbacks])
    failed = [r for r in results if r.feasibility]
    log.info("synthesized %d SA2s (%d persons, %d households), %d failed", len(results),
             sum(r.persons for r in results), sum(r.households for r in results), len(failed))
    return EXIT_FEASIBILITY if failed else EXIT_OK


# -- assign-addresses ----------------------------------------------------------

def cmd_assign_addresses(args) -> int:
    from . import spatial

    pop_dir = _existing(args.population)
    hh_rows = popio.read_households(_existing(pop_dir / popio.HOUSEHOLDS_FILE))
    sa1 = spatial.parse_sa1_marginal(_existing(args.sa1_marginal))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(args.cache) if args.cache else out / "address_sa1_cache.csv"
    mapping, cached = spatial.cached_address_mapping(_existing(args.addresses),
                                                     _existing(args.polygons), cache)
    log.info("address mapping %s: %d matched, %d unmatched", "reused" if cached else "computed",
             len(mapping.sa1_of), len(mapping.unmatched))
    addr_by_sa1: dict[str, list[str]] = {}
    for aid, code in mapping.sa1_of.items():
        addr_by_sa1.setdefault(code, []).append(aid)

    by_sa2: dict[str, list] = {}
    for hh, _ in hh_rows:
        by_sa2.setdefault(hh.sa2, []).append(hh)
    reuse = []
    for code in sorted(by_sa2):
        hhs = by_sa2[code]
        targets: dict = {}
        for hh in hhs:
            targets[hh.composition] = targets.get(hh.composition, 0) + 1
        m = spatial.reconcile_sa1_marginal(sa1.get(code, spatial.Sa1Marginal(code)), targets)
        spatial.allocate_households_to_sa1(hhs, m, sa2_rng(args.seed, "sa1:" + code))
        reuse += spatial.assign_addresses(hhs, addr_by_sa1, sa2_rng(args.seed, "address:" + code))

    popio.write_households(out / popio.HOUSEHOLDS_FILE, hh_rows, spatial=True)
    if out.resolve() != pop_dir.resolve():
        for name in (popio.PERSONS_FILE, popio.FAMILIES_FILE):
            if (pop_dir / name).exists():
                shutil.copyfile(pop_dir / name, out / name)
    with open(out / "unmatched_addresses.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["address_id"])
        w.writerows([a] for a in mapping.unmatched)
    with open(out / "address_reuse.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["household_id", "sa1", "address_id"])
        w.writerows([r.household_id, r.sa1, r.address_id] for r in reuse)
    log.info("assigned %d households, %d address reuses", len(hh_rows), len(reuse))
    return EXIT_OK


# -- validate ------------------------------------------------------------------

def cmd_validate(args) -> int:
    persons, households, ages = read_input_dir(_existing(args.expected))
    pops = popio.read_population(_existing(args.population))
    results = []
    for code in sorted(set(persons) | set(households) | set(pops)):
        pop = pops.get(code)
        results += compare_sa2(code, persons.get(code, PersonMarginal(code)),
                               households.get(code, HouseholdMarginal(code)),
                               ages.get(code, AgePyramid(code)),
                               pop.persons if pop else [], pop.households if pop else [])
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    for row in write_report(args.out, results):
        log.info("%s", row)
    return EXIT_OK


# -- gen-test ------------------------------------------------------------------

def cmd_gen_test(args) -> int:
    from . import oracle, spatial

    try:
        params = oracle.OracleParams(n_sa2=args.sa2s, households=args.households,
                                     sa1_per_sa2=args.sa1s)
        if not 0.0 <= args.perturb <= 1.0:
            raise ValueError("--perturb must lie in [0, 1]")
    except ValueError as exc:
        raise CliInputError(str(exc)) from None
    truths = oracle.generate_ground_truth(params, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    marginals = [oracle.Marginals(t.persons, t.households, t.ages) for t in truths]
    if args.perturb:
        marginals = [oracle.perturb_marginals(m, args.perturb, args.seed) for m in marginals]
    write_person_marginals(out / PERSON_FILE, [m.persons for m in marginals])
    write_household_marginals(out / HOUSEHOLD_FILE, [m.households for m in marginals])
    write_age_pyramids(out / AGE_FILE, [m.ages for m in marginals])
    spatial.write_sa1_marginals(out / SA1_FILE, [t.sa1 for t in truths])
    if args.geography:
        polys, points = oracle.generate_geography(truths, args.seed)
        spatial.write_polygons(out / POLYGON_FILE, polys)
        spatial.write_addresses_csv(out / ADDRESS_FILE, points)
    log.info("wrote %d SA2s to %s", len(truths), out)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def default_threads() -> int:
    env = os.environ.get("POPSYNTH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring POPSYNTH_THREADS=%r", env)
    return 1


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    """The full parser; ``config`` values (keyed by flag name) become defaults."""
    config = config or {}

    def opt(p, flag, required=False, **kw):
        dest = flag.lstrip("-").replace("-", "_")
        if dest in config:
            kw["default"] = config[dest]
            required = False
        p.add_argument(flag, required=required, **kw)

    parser = argparse.ArgumentParser(prog="popsynth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--config", help="JSON file whose keys mirror the long flag names")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("clean", help="reconcile person marginals to household marginals")
    opt(c, "--persons", required=True)
    opt(c, "--households", required=True)
    opt(c, "--ages", required=True)
    opt(c, "--out", required=True)
    opt(c, "--eight-plus-surplus", type=int, default=0)
    c.set_defaults(func=cmd_clean)

    s = sub.add_parser("synthesize", help="build persons, families and households")
    opt(s, "--input", required=True)
    opt(s, "--out", required=True)
    opt(s, "--seed", type=int, default=0)
    opt(s, "--sa2", action="append", default=[])
    opt(s, "--threads", type=int, default=default_threads())
    opt(s, "--gap-min", type=int, default=15)
    opt(s, "--gap-max", type=int, default=45)
    opt(s, "--partner-offsets", type=int, nargs="+", default=[0, -1])
    opt(s, "--couple-child-prob", type=float, default=0.5)
    opt(s, "--max-retries", type=int, default=100)
    opt(s, "--eight-plus-surplus", type=int, default=0)
    s.set_defaults(func=cmd_synthesize)

    a = sub.add_parser("assign-addresses", help="place households in SA1s and at addresses")
    opt(a, "--population", required=True)
    opt(a, "--sa1-marginal", required=True)
    opt(a, "--polygons", required=True)
    opt(a, "--addresses", required=True)
    opt(a, "--out", required=True)
    opt(a, "--seed", type=int, default=0)
    opt(a, "--cache", help="address to SA1 cache file (default: in --out)")
    a.set_defaults(func=cmd_assign_addresses)

    v = sub.add_parser("validate", help="compare a population with its input marginals")
    opt(v, "--expected", required=True)
    opt(v, "--population", required=True)
    opt(v, "--out", required=True)
    v.set_defaults(func=cmd_validate)

    g = sub.add_parser("gen-test", help="write oracle-generated test inputs")
    opt(g, "--sa2s", type=int, required=True)
    opt(g, "--households", type=int, required=True)
    opt(g, "--out", required=True)
    opt(g, "--seed", type=int, default=0)
    opt(g, "--perturb", type=float, default=0.0)
    opt(g, "--sa1s", type=int, default=4)
    opt(g, "--geography", action="store_true", help="also write SA1 polygons and addresses")
    g.set_defaults(func=cmd_gen_test)
    return parser


def load_config(argv: list[str]) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        with open(known.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliInputError(f"{known.config}: {exc}") from None
    if not isinstance(conf, dict):
        raise CliInputError(f"{known.config}: expected a JSON object")
    return {k.lstrip("-").replace("-", "_"): v for k, v in conf.items()}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = load_config(argv)
    except CliInputError as exc:
        print(f"popsynth: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    args = build_parser(config).parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliInputError, InputError) as exc:
        print(f"popsynth: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FeasibilityError as exc:
        print(f"popsynth: infeasible: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except OSError as exc:
        print(f"popsynth: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
