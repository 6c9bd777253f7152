import pytest

from popsynth.ingest import AgePyramid, HouseholdMarginal, PersonMarginal
from popsynth.oracle import OracleParams, generate_ground_truth
from popsynth.schema import (
    AGE_BIN_LABELS,
    HouseholdCategory,
    HouseholdComposition,
    PersonCategory,
    Rel,
    Sex,
)


def pcat(sex: str, age: str, rel: str) -> PersonCategory:
    return PersonCategory(Sex(sex), AGE_BIN_LABELS.index(age), Rel(rel))


def hcat(size, comp: str) -> HouseholdCategory:
    size = 8 if size == "8+" else int(size)
    return HouseholdCategory(size, HouseholdComposition.parse(comp))



def pm(counts: dict, sa2="X") -> PersonMarginal:
    return PersonMarginal(sa2, {pcat(*k): v for k, v in counts.items() if v})


def hm(counts: dict, sa2="X") -> HouseholdMarginal:
    return HouseholdMarginal(sa2, {hcat(*k): v for k, v in counts.items() if v})


def flat_pyramid(p: PersonMarginal) -> AgePyramid:
    """A pyramid whose bin totals match ``p``, spread evenly inside each bin."""
    from popsynth.apportion import largest_remainder
    from popsynth.schema import AGE_RANGES

    counts = [0] * 101
    for b, total in enumerate(p.bin_totals()):
        lo, hi = AGE_RANGES[b]
        for age, n in zip(range(lo, hi + 1), largest_remainder([1] * (hi - lo + 1), total)):
            counts[age] = n
    return AgePyramid(p.sa2, counts)


@pytest.fixture(scope="session")
def truths():
    return generate_ground_truth(OracleParams(n_sa2=12, households=250), seed=11)


def random_inconsistent(seed: int):
    """An oracle SA2 whose person marginal and pyramid have been badly distorted.

    Returns ``(persons, households, ages)``.
    """
    import random

    from popsynth.oracle import Marginals, generate_sa2, perturb_marginals
    from popsynth.schema import VALID_PERSON_CATEGORIES

    rng = random.Random(seed)
    params = OracleParams(households=rng.randint(5, 300), extra_person_rate=rng.uniform(0, 0.6))
    truth = generate_sa2(f"9{seed:08d}", params, seed)
    m = perturb_marginals(Marginals(truth.persons, truth.households, truth.ages),
                          rng.uniform(0.01, 0.6), seed)
    p, a = m.persons, m.ages
    dropped = rng.choice([None, *Rel])
    if dropped is not None:
        p.counts = {c: n for c, n in p.counts.items() if c.rel is not dropped}
    for _ in range(rng.randint(0, 10)):
        c = rng.choice(VALID_PERSON_CATEGORIES)
        p.counts[c] = p.counts.get(c, 0) + rng.randint(1, 30)
    for _ in range(rng.randint(0, 5)):
        a.counts[rng.randint(0, 100)] += rng.randint(0, 40)
    return p, m.households, a


# -- acceptance summary -------------------------------------------------------

_acceptance: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = "; ".join(f"{k}={v}" for k, v in report.user_properties)
        _acceptance[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        status, detail = _acceptance[name]
        label = name.removeprefix("test_criterion_")
        terminalreporter.write_line(f"{status}  {label}" + (f"  ({detail})" if detail else ""))
