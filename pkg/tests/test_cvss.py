"""CVSS v3.1 base scores against an exact-arithmetic oracle and published values."""

from __future__ import annotations

from decimal import ROUND_CEILING, Decimal, getcontext

import pytest

from malscan.cvss import (
    METRIC_ORDER,
    CvssVector,
    MalformedVector,
    Severity,
    all_vectors,
    base_score,
    parse_vector,
    roundup,
)

getcontext().prec = 50

# weights as printed in the v3.1 specification, kept as exact decimals
W_AV = {"N": "0.85", "A": "0.62", "L": "0.55", "P": "0.2"}
W_AC = {"L": "0.77", "H": "0.44"}
W_PR_U = {"N": "0.85", "L": "0.62", "H": "0.27"}
W_PR_C = {"N": "0.85", "L": "0.68", "H": "0.5"}
W_UI = {"N": "0.85", "R": "0.62"}
W_CIA = {"H": "0.56", "L": "0.22", "N": "0"}


def oracle(v: CvssVector) -> Decimal:
    d = lambda s: Decimal(s)  # noqa: E731
    iss = 1 - (1 - d(W_CIA[v.confidentiality])) * (1 - d(W_CIA[v.integrity])) * (1 - d(W_CIA[v.availability]))
    if v.scope == "U":
        impact = d("6.42") * iss
        pr = W_PR_U[v.privileges_required]
    else:
        impact = d("7.52") * (iss - d("0.029")) - d("3.25") * (iss - d("0.02")) ** 15
        pr = W_PR_C[v.privileges_required]
    expl = d("8.22") * d(W_AV[v.attack_vector]) * d(W_AC[v.attack_complexity]) * d(pr) * d(W_UI[v.user_interaction])
    if impact <= 0:
        return Decimal("0.0")
    total = impact + expl
    if v.scope == "C":
        total = total * d("1.08")
    total = min(total, d("10"))
    return (total * 10).to_integral_value(rounding=ROUND_CEILING) / 10


# scores as published by the NVD calculator for these vectors
PUBLISHED = {
    "AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H": 9.8,
    "AV:N/AC:L/PR:N/UI:N/S:C/C:H/I:H/A:H": 10.0,
    "AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:N": 0.0,
    "AV:N/AC:L/PR:N/UI:R/S:C/C:L/I:L/A:N": 6.1,
    "AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:N/A:N": 7.5,
    "AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:N": 9.1,
    "AV:N/AC:L/PR:L/UI:N/S:U/C:H/I:H/A:H": 8.8,
    "AV:L/AC:L/PR:L/UI:N/S:U/C:H/I:H/A:H": 7.8,
    "AV:N/AC:H/PR:N/UI:N/S:U/C:H/I:H/A:H": 8.1,
    "AV:N/AC:H/PR:N/UI:N/S:U/C:H/I:N/A:N": 5.9,
    "AV:N/AC:L/PR:N/UI:N/S:U/C:L/I:N/A:N": 5.3,
    "AV:N/AC:L/PR:N/UI:R/S:U/C:L/I:L/A:N": 5.4,
    "AV:P/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H": 6.8,
    "AV:A/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H": 8.8,
    "AV:N/AC:L/PR:H/UI:N/S:U/C:H/I:H/A:H": 7.2,
    "AV:N/AC:L/PR:N/UI:N/S:C/C:L/I:L/A:N": 7.2,
    "AV:N/AC:L/PR:L/UI:N/S:C/C:H/I:H/A:H": 9.9,
    "AV:L/AC:L/PR:N/UI:R/S:U/C:H/I:H/A:H": 7.8,
}


def test_enumeration_covers_every_combination():
    vectors = list(all_vectors())
    assert len(vectors) == 4 * 2 * 3 * 2 * 2 * 3 * 3 * 3 == 2592
    assert len(set(vectors)) == 2592


def test_exhaustive_equivalence_with_oracle():
    mismatches = [(v.render(), base_score(v).value, oracle(v))
                  for v in all_vectors() if Decimal(str(base_score(v).value)) != oracle(v)]
    assert mismatches == []


@pytest.mark.parametrize("vector,expected", sorted(PUBLISHED.items()))
def test_published_scores(vector, expected):
    assert base_score(parse_vector("CVSS:3.1/" + vector)).value == expected


def test_spot_values_and_severity():
    assert base_score(parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H")).severity is Severity.CRITICAL
    assert base_score(parse_vector("CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:N/I:N/A:N")).severity is Severity.NONE


@pytest.mark.parametrize("value,expected", [(4.02, 4.1), (4.0, 4.0), (4.000000000000001, 4.0), (0.0, 0.0),
                                            (9.99, 10.0), (5.91, 6.0), (1.00001, 1.1),
                                            (1.000001, 1.0)])
def test_roundup(value, expected):
    assert roundup(value) == expected


@pytest.mark.parametrize("score,band", [(0.0, "None"), (0.1, "Low"), (3.9, "Low"), (4.0, "Medium"), (6.9, "Medium"),
                                        (7.0, "High"), (8.9, "High"), (9.0, "Critical"), (10.0, "Critical")])
def test_severity_bands(score, band):
    assert Severity.for_score(score).value == band


def test_render_parse_round_trip():
    for v in all_vectors():
        assert parse_vector(v.render()) == v


def test_parse_accepts_any_metric_order():
    v = parse_vector("CVSS:3.1/A:H/I:H/C:H/S:U/UI:N/PR:N/AC:L/AV:N")
    assert v.render() == "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H"


@pytest.mark.parametrize("text", [
    "CVSS:3.1/AV:N/AC:L",
    "CVSS:3.0/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
    "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H/AV:N",
    "CVSS:3.1/AV:X/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
    "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/Q:H",
    "CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/AH",
    "",
])
def test_malformed_vectors(text):
    with pytest.raises(MalformedVector):
        parse_vector(text)


def test_impact_metrics_are_monotone():
    order = ["N", "L", "H"]
    for v in all_vectors():
        for field in ("confidentiality", "integrity", "availability"):
            cur = getattr(v, field)
            if cur == "H":
                continue
            raised = CvssVector(**{**v.__dict__, field: order[order.index(cur) + 1]})
            assert base_score(raised).value >= base_score(v).value


def test_metric_order_is_canonical():
    assert METRIC_ORDER == ("AV", "AC", "PR", "UI", "S", "C", "I", "A")
