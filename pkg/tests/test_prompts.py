import pytest

from promptseg.prompts import (
    ClassSpec,
    PromptSet,
    canonicalize,
    detector_vocabulary,
    load_prompt_file,
    scorer_candidates,
)

ROOF_SET = PromptSet((ClassSpec(1, "building", ("Roof", "The roof of a building", "House")),))


def test_vocabulary_singleton():
    ps = PromptSet((ClassSpec(1, "building", ("building",)),))
    assert detector_vocabulary(ps) == [("building", 1)]


def test_vocabulary_building_synonyms():
    assert detector_vocabulary(ROOF_SET) == [
        ("Roof", 1),
        ("The roof of a building", 1),
        ("House", 1),
    ]


def test_vocabulary_flatten_order():
    ps = PromptSet(
        (ClassSpec(1, "a", ("a1", "a2")), ClassSpec(2, "b", ("b1", "b2", "b3")))
    )
    assert detector_vocabulary(ps) == [("a1", 1), ("a2", 1), ("b1", 2), ("b2", 2), ("b3", 2)]


def test_canonicalize():
    assert canonicalize("roof", ROOF_SET) == 1
    assert canonicalize("ROOF", ROOF_SET) == 1
    assert canonicalize("swimming pool", ROOF_SET) is None
    assert canonicalize("Building", ROOF_SET) == 1  # canonical name resolves too


def test_canonicalize_consistent_with_vocabulary(building_lake):
    for text, cid in detector_vocabulary(building_lake):
        assert canonicalize(text, building_lake) == cid


def test_scorer_candidates_building_lake():
    ps = PromptSet(
        (ClassSpec(1, "Building", ("Building",)), ClassSpec(2, "Lake", ("Lake",))),
        unrelated=("ground", "grass"),
    )
    cands = scorer_candidates(ps)
    assert cands == [
        ("The satellite view of Building", 1),
        ("The satellite view of Lake", 2),
        ("ground", None),
        ("grass", None),
    ]

    four = PromptSet(
        tuple(ClassSpec(i, n, (n,)) for i, n in enumerate(["Building", "Road", "Lake", "Forest"], 1)),
        unrelated=("Car", "Cropland", "Basketball court", "Plain"),
    )
    cands = scorer_candidates(four)
    assert len(cands) == 8
    assert [c for _, c in cands] == [1, 2, 3, 4, None, None, None, None]


def test_scorer_candidates_no_unrelated_and_template_override():
    assert scorer_candidates(ROOF_SET) == [("The satellite view of building", 1)]
    assert scorer_candidates(ROOF_SET, "aerial photo of {name}") == [("aerial photo of building", 1)]


def test_templating_injective(building_lake):
    texts = [t for t, _ in scorer_candidates(building_lake)]
    assert len(set(texts)) == len(texts)


@pytest.mark.parametrize(
    "classes, unrelated",
    [
        ((ClassSpec(1, "a", ("x",)), ClassSpec(2, "b", ("X",))), ()),  # ambiguous synonym
        ((ClassSpec(1, "a", ("x",)),), ("X",)),  # unrelated collides
        ((ClassSpec(2, "a", ("x",)),), ()),  # ids not from 1
        ((ClassSpec(1, "a", ("x",)), ClassSpec(3, "b", ("y",))), ()),  # gap
        ((), ()),
    ],
)
def test_invalid_prompt_sets(classes, unrelated):
    with pytest.raises(ValueError):
        PromptSet(classes, unrelated)


def test_classspec_needs_synonyms():
    with pytest.raises(ValueError):
        ClassSpec(1, "a", ())


def test_load_prompt_file(tmp_path):
    path = tmp_path / "prompts.yaml"
    path.write_text(
        "classes:\n"
        "  - {id: 1, name: building, synonyms: [Roof, House]}\n"
        "  - {id: 2, name: lake}\n"
        "unrelated: [ground]\n"
    )
    ps = load_prompt_file(path)
    assert ps.class_number == 2
    assert ps.by_id(2).synonyms == ("lake",)
    assert ps.unrelated == ("ground",)
    assert PromptSet.from_dict(ps.to_dict()) == ps
