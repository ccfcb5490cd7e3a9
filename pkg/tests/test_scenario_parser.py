import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrfnet.scenario import BUNDLED, ScenarioError, format_scenario, load, parse, source
from qrfnet.scenario.ast import (
    CheckQuery, DistributionQuery, InteractStmt, MeasureStmt, PrepareStmt, TransformQuery, UnitaryDecl,
)

R = 1 / math.sqrt(2)

HEADER = "wavefunction psi = {0: 1/sqrt2, 1: 1/sqrt2}\nparticle F = psi\nparticle S\n"


def errors_of(text):
    with pytest.raises(ScenarioError) as exc:
        parse(text)
    return exc.value.errors


def test_paradox_structure():
    sc = load("paradox")
    assert sc.name == "paradox"
    assert len(sc.particles) == 4
    kinds = [type(e) for e in sc.events]
    assert kinds.count(PrepareStmt) == 2
    assert kinds.count(InteractStmt) == 1
    assert kinds.count(MeasureStmt) == 2
    assert len(sc.queries) == 2


@pytest.mark.parametrize("name", BUNDLED)
def test_print_parse_fixpoint(name):
    sc = parse(source(name))
    text = format_scenario(sc)
    again = parse(text)
    assert again == sc
    assert format_scenario(again) == text


def test_undeclared_particle_single_error():
    errs = errors_of(HEADER + "prepare F X psi\n")
    assert len(errs) == 1
    assert "'X'" in errs[0].message
    assert errs[0].line == 4


def test_malformed_complex_literal_position():
    errs = errors_of("wavefunction w = {0: 1/sqrtx}\n")
    assert len(errs) == 1
    assert errs[0].line == 1 and errs[0].column > 1
    assert "malformed complex literal" in errs[0].message


def test_repreparation_rejected():
    text = HEADER + "particle G\nprepare F S psi\nprepare G S psi\n"
    errs = errors_of(text)
    assert len(errs) == 1 and "re-preparation" in errs[0].message and errs[0].line == 6


def test_prepare_after_measurement_rejected():
    errs = errors_of(HEADER + "measure S\nprepare F S psi\n")
    assert "no longer in the zero-momentum state" in errs[0].message


def test_prepare_declared_initial_state_rejected():
    errs = errors_of(HEADER + "particle T = psi\nprepare F T psi\n")
    assert "initial state" in errs[0].message


def test_all_errors_collected():
    text = "particle A\nfoo bar\nmeasure B\nwavefunction w = {0: 1, 1: 1}\n"
    errs = errors_of(text)
    assert [e.line for e in errs] == [2, 3, 4]
    assert "not normalized" in errs[2].message


def test_unitary_block_syntax():
    text = (
        "particle A\nparticle B\n"
        "unitary u\n"
        "  block 1: (0,1) (1,0) = [[1/sqrt2, -1/sqrt2], [1/sqrt2, 1/sqrt2]]\n"
        "end\n"
        "interact A B u\n"
    )
    sc = parse(text)
    (u,) = [s for s in sc.statements if isinstance(s, UnitaryDecl)]
    assert u.blocks[0].basis == ((0, 1), (1, 0))
    assert u.blocks[0].rows[0][1].value == pytest.approx(-R)


def test_unitary_errors():
    assert "missing its 'end'" in errors_of("unitary u\n  block 0: (0,0) = [[1]]\n")[0].message
    assert "must be 2x2" in errors_of("unitary u\n  block 1: (0,1) (1,0) = [[1]]\nend\n")[0].message
    assert "cannot be redefined" in errors_of("unitary swap\n  block 0: (0,0) = [[1]]\nend\n")[0].message
    assert "undeclared unitary" in errors_of("particle A\nparticle B\ninteract A B nope\n")[0].message


def test_complex_literal_forms():
    text = "wavefunction w = {0: 1/2+1/2i, 1: -1/2i, 2: (1/2)*i*i}\nwavefunction v = {0: sqrt(1/2), 1: i/sqrt2}\n"
    sc = parse(text)
    assert sc.wavefunctions["w"].literal.as_dict() == pytest.approx({0: 0.5 + 0.5j, 1: -0.5j, 2: -0.5})
    assert sc.wavefunctions["v"].literal.as_dict() == pytest.approx({0: R, 1: R * 1j})


def test_json_style_wavefunction():
    sc = parse('particle A = {"0": [0.6, 0], "1": [0, 0.8]}\n')
    assert sc.particles[0].init.as_dict() == {0: 0.6, 1: 0.8j}


def test_queries_and_points():
    text = (
        HEADER
        + "prepare F S psi\ncheckpoint ready\nmeasure S\n"
        "query distribution F at ready given S=1\n"
        "query check F,S reference 1 expect pass\n"
        "query transform pair order F,S at prepared\n"
    )
    sc = parse(text)
    d, c, t = sc.queries
    assert isinstance(d, DistributionQuery) and d.at == "ready" and d.given == (("S", 1),)
    assert isinstance(c, CheckQuery) and c.reference == 1 and c.expect == "pass"
    assert isinstance(t, TransformQuery) and t.order == ("F", "S") and t.at == "prepared"
    assert sc.checkpoints() == {"ready": 1}


def test_bad_checkpoints():
    assert "reserved" in errors_of("checkpoint end\n")[0].message
    assert "undeclared checkpoint" in errors_of(HEADER + "query check F reference nowhere\n")[0].message


def test_comments_and_blank_lines():
    sc = parse("# heading\n\nparticle A  # trailing\n")
    assert [p.name for p in sc.particles] == ["A"]


# -- properties ----------------------------------------------------------

names = st.from_regex(r"[A-Z][a-z0-9]{0,3}", fullmatch=True).filter(lambda n: n != "Root")


@settings(max_examples=60, deadline=None)
@given(st.lists(names, min_size=2, max_size=5, unique=True), st.data())
def test_generated_scenarios_fixpoint(parts, data):
    lines = ["scenario gen", "wavefunction w = {-1: 1/sqrt2, 1: i/sqrt2}"]
    lines += [f"particle {p}" for p in parts]
    lines.append("particle Root = {0: 1/2, 2: 1/2+1/2i, 3: -1/2}")
    for p in parts:
        if data.draw(st.booleans()):
            lines.append(f"prepare Root {p} w")
    a, b = parts[0], parts[1]
    if data.draw(st.booleans()):
        lines.append(f"interact {a} {b} beamsplitter")
    lines.append(f"measure {a}")
    lines.append(f"query distribution {','.join(parts)} given {a}={data.draw(st.integers(-3, 3))}")
    lines.append(f"query check Root,{a}")
    sc = parse("\n".join(lines) + "\n")
    assert parse(format_scenario(sc)) == sc


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="particleprepmeasurquy ASF=,{}:0123456789/\n#", max_size=80))
def test_parse_never_crashes(text):
    try:
        parse(text)
    except ScenarioError as exc:
        assert exc.errors and all(e.line >= 1 for e in exc.errors)
