import math

import pytest
import tomli
from hypothesis import given
from hypothesis import strategies as st

from fuzzystab.scenario import SCHEMA, ScenarioError, apply_overrides, parse_scenario

MINIMAL = 'algebra = "matrix:2"\ncontrol = "powersum eps=0.1 p=0.5"\nmode = "homomorphism"\n'


def test_minimal_document_resolves_alpha():
    sc = parse_scenario(MINIMAL)
    assert sc.control.alpha == pytest.approx(2**0.5)
    assert sc.algebra.label == "matrix:2" and sc.mode == "homomorphism"
    assert sc.stabilizer.mode == "dyadic" and sc.alt_stabilizer.mode == "linear_diagnostic"
    assert sc.identity_tol == pytest.approx(100 * sc.stabilizer.tol)


def test_large_exponent_with_dyadic_mode_is_rejected():
    with pytest.raises(ScenarioError, match="0<alpha<2"):
        parse_scenario(MINIMAL.replace("p=0.5", "p=1.5"))


def test_large_exponent_is_accepted_for_reverse_iteration():
    sc = parse_scenario(MINIMAL.replace("p=0.5", "p=1.5") + '[stabilizer]\nmode = "superlinear"\n')
    assert sc.control.superlinear and sc.alt_stabilizer.mode == "superlinear"


def test_empty_document_lists_required_fields():
    with pytest.raises(ScenarioError) as err:
        parse_scenario("")
    text = str(err.value)
    for field in ("control.kind", "control.eps", "perturbation.mode", "algebra.name"):
        assert field in text


def test_unknown_fields_are_named_with_line_numbers():
    doc = MINIMAL + "[stabilizer]\nmode = \"dyadic\"\nmax_iter = 10\n[extras]\nx = 1\n"
    with pytest.raises(ScenarioError) as err:
        parse_scenario(doc)
    problems = err.value.problems
    assert any("line 6" in p and "stabilizer.max_iter" in p for p in problems)
    assert any("extras" in p for p in problems)


def test_type_errors_are_reported():
    with pytest.raises(ScenarioError, match="stabilizer.max_iters: expected an integer"):
        parse_scenario(MINIMAL + "[stabilizer]\nmax_iters = 1.5\n")
    with pytest.raises(ScenarioError, match="malformed"):
        parse_scenario("algebra = ")


def test_shorthand_and_table_conflict():
    with pytest.raises(ScenarioError, match="given both"):
        parse_scenario(MINIMAL + '[perturbation]\nmode = "derivation"\n')


@pytest.mark.parametrize("extra, needle", [
    ('[norm]\nkind = "fuzzy"\n', "unknown fuzzy norm kind"),
    ('[norm]\nkind = "levels"\n', "levels"),
    ('[norm]\nkind = "ratio"\nlevels = [[0.5, 1.0]]\n', "only meaningful"),
    ('[perturbation]\nbase = "euler"\n', "unknown base map"),
    ('[perturbation]\nprofile = "gaussian"\n', "profile"),
    ('[stabilizer]\nmode = "triadic"\n', "stabilizer"),
    ('[uniqueness]\ndelta = 2.0\n', "uniqueness.delta"),
    ('[grid]\nthresholds = [1.0, 0.5]\n', "thresholds"),
    ('[grid]\nscalars = [0.0]\n', "scalars"),
])
def test_invalid_values(extra, needle):
    with pytest.raises(ScenarioError, match=needle):
        parse_scenario(MINIMAL + extra)


def test_inline_structure_constants():
    doc = (
        '[algebra]\ndim = 1\nstructure_constants = [1.0]\nlabel = "line"\n'
        '[control]\nkind = "constant"\neps = 0.1\n[perturbation]\nmode = "homomorphism"\n'
    )
    sc = parse_scenario(doc)
    assert sc.algebra.dim == 1 and sc.algebra.label == "line"
    with pytest.raises(ScenarioError, match="dim\\^3"):
        parse_scenario(doc.replace("[1.0]", "[1.0, 2.0]"))


def test_overrides():
    sc = parse_scenario(MINIMAL, ["control.eps=0.2", "mode=derivation", "grid.seed=5", "stabilizer.mode=linear_diagnostic"])
    assert sc.control.eps == 0.2 and sc.mode == "derivation"
    assert sc.resolved["grid"]["seed"] == 5 and sc.stabilizer.mode == "linear_diagnostic"
    assert sc.perturbation["base"] == "inner"
    sc = parse_scenario(MINIMAL, ['control=constant eps=0.3'])
    assert sc.control.kind == "constant" and sc.control.eps == 0.3
    with pytest.raises(ScenarioError):
        apply_overrides({}, ["no-equals-sign"])


def test_echo_round_trips():
    sc = parse_scenario(MINIMAL + '[norm]\nkind = "levels"\nlevels = [[0.5, 1.0], [1.0, 2.0]]\n')
    again = parse_scenario(sc.echo())
    assert again.resolved == sc.resolved
    assert set(tomli.loads(sc.echo())) <= set(SCHEMA)


@given(
    st.floats(1e-3, 10), st.floats(-2, 0.99).filter(lambda p: abs(p) > 1e-9 and abs(p - 1) > 1e-3),
    st.integers(0, 2**63), st.sampled_from(["real", "matrix:2", "poly:2"]),
)
def test_resolved_echo_is_a_fixed_point(eps, p, seed, name):
    doc = f'algebra = "{name}"\nmode = "homomorphism"\n[control]\nkind = "powersum"\neps = {eps!r}\np = {p!r}\n[perturbation]\nseed = {seed}\n'
    sc = parse_scenario(doc)
    assert sc.control.alpha == pytest.approx(2**p)
    echo = sc.echo()
    assert parse_scenario(echo).echo() == echo
    assert math.isclose(tomli.loads(echo)["control"]["eps"], eps)
