import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motiontax.taxonomy import (
    AmbiguousLabelError,
    CodeDistanceWeights,
    CodeFormatError,
    MotionCode,
    MotionLexicon,
    LexiconEntry,
    UnknownLabelError,
    code_distance,
    consolidate,
    describe_code,
    enumerate_legal_codes,
    load_lexicon,
    lookup,
    normalize_label,
    parse_code,
    render_code,
    save_lexicon,
    strip_qualifier,
    validate,
)

ALL_STRINGS = [format(i, "08b") for i in range(256)]

# Independent statement of the legality rules, used to cross-check validate().
# Contact codes: rigid subclass in {00, 11}, soft subclass in {00, 10, 11}.
# Non-contact codes: engagement, subclass and duration bits all zero.


def brute_force_legal(bits: str) -> bool:
    contact, engagement = int(bits[0]), int(bits[1])
    subclass = bits[2:4]
    duration = int(bits[6])
    if contact == 0:
        return engagement == 0 and subclass == "00" and duration == 0
    if engagement == 0:
        return subclass in ("00", "11")
    return subclass in ("00", "10", "11")


class TestParseRender:
    def test_caption_walkthrough(self):
        code = parse_code("10111010")
        assert code.contact == 1
        assert code.engagement == 0  # rigid
        assert code.subclass == 0b11  # moving
        assert code.prismatic == 1
        assert code.revolute == 0
        assert code.duration == 1  # continuous
        assert code.manual == 0  # unimanual

    def test_twist_code(self):
        code = parse_code("11110111")
        assert (code.contact, code.engagement, code.subclass) == (1, 1, 0b11)
        assert (code.prismatic, code.revolute) == (0, 1)
        assert (code.duration, code.manual) == (1, 1)

    def test_wrong_length_rejected(self):
        with pytest.raises(CodeFormatError):
            parse_code("1011")

    def test_non_binary_rejected(self):
        with pytest.raises(CodeFormatError):
            parse_code("1011101x")

    def test_zero_code_renders(self):
        assert render_code(MotionCode()) == "00000000"

    def test_round_trip_all_256(self):
        for s in ALL_STRINGS:
            assert render_code(parse_code(s)) == s

    def test_structured_round_trip(self):
        for s in ALL_STRINGS:
            code = parse_code(s)
            assert parse_code(render_code(code)) == code

    @given(st.text(alphabet="01", min_size=8, max_size=8))
    def test_round_trip_property(self, s):
        assert render_code(parse_code(s)) == s

    def test_field_range_checked(self):
        with pytest.raises(ValueError):
            MotionCode(contact=2)
        with pytest.raises(ValueError):
            MotionCode(subclass=4)


class TestValidate:
    def test_caption_example_legal(self):
        assert validate(parse_code("10111010")).ok

    def test_illegal_rigid_subclass(self):
        result = validate(parse_code("10011010"))
        assert not result.ok
        assert any("subclass" in v for v in result.violations)

    def test_illegal_soft_subclass(self):
        result = validate(parse_code("11011010"))
        assert not result.ok

    def test_non_contact_engagement_bit(self):
        result = validate(parse_code("01000000"))
        assert not result.ok
        assert any("engagement" in v for v in result.violations)

    def test_non_contact_duration_bit(self):
        result = validate(parse_code("00000010"))
        assert not result.ok
        assert any("duration" in v for v in result.violations)

    def test_trajectory_00_warns_but_legal(self):
        result = validate(parse_code("10000010"))
        assert result.ok
        assert any("trajectory" in w for w in result.warnings)

    def test_violations_name_attributes(self):
        result = validate(parse_code("01110010"))
        named = " ".join(result.violations)
        assert "engagement" in named and "subclass" in named and "duration" in named


class TestEnumerate:
    def test_count_is_88(self):
        assert len(enumerate_legal_codes()) == 88

    def test_matches_brute_force(self):
        legal = {render_code(c) for c in enumerate_legal_codes()}
        expected = {s for s in ALL_STRINGS if brute_force_legal(s)}
        assert legal == expected

    def test_matches_validate(self):
        legal = set(enumerate_legal_codes())
        for s in ALL_STRINGS:
            code = parse_code(s)
            assert (code in legal) == validate(code).ok

    def test_ascending_order(self):
        rendered = [render_code(c) for c in enumerate_legal_codes()]
        assert rendered == sorted(rendered)

    def test_contains_seed_codes(self, seed_lexicon):
        legal = set(enumerate_legal_codes())
        for entry in seed_lexicon:
            assert entry.code in legal

    def test_excludes_illegal(self):
        assert parse_code("10011010") not in set(enumerate_legal_codes())


class TestDistance:
    def test_same_row_zero(self, seed_lexicon):
        assert code_distance(lookup("cut", seed_lexicon), lookup("slice", seed_lexicon)) == 0.0

    def test_single_bit(self):
        assert code_distance(parse_code("11111010"), parse_code("11111011")) == 1.0

    def test_identity(self):
        code = parse_code("11001010")
        assert code_distance(code, code) == 0.0

    def test_weighted(self):
        w = CodeDistanceWeights((2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5))
        assert code_distance(parse_code("00000000"), parse_code("10000001"), w) == 2.5

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            CodeDistanceWeights((1.0,) * 7)
        with pytest.raises(ValueError):
            CodeDistanceWeights((-1.0,) + (1.0,) * 7)
        with pytest.raises(ValueError):
            CodeDistanceWeights((0.0,) * 8)

    def test_metric_properties_exhaustive(self):
        codes = enumerate_legal_codes()
        bits = np.array([c.bits() for c in codes], dtype=np.int8)
        D = (bits[:, None, :] != bits[None, :, :]).sum(axis=2).astype(np.float64)
        assert np.all(D >= 0)
        assert np.array_equal(D, D.T)
        assert np.all((D == 0) == np.eye(len(codes), dtype=bool))
        # triangle inequality over all 88^3 triples
        assert np.all(D[:, None, :] <= D[:, :, None] + D[None, :, :] + 1e-12)

    def test_matches_python_distance(self):
        codes = enumerate_legal_codes()[:10]
        for a, b in itertools.combinations(codes, 2):
            expected = sum(x != y for x, y in zip(a.bits(), b.bits()))
            assert code_distance(a, b) == expected


class TestLexicon:
    def test_seed_has_14_codes(self, seed_lexicon):
        assert len(seed_lexicon.codes()) == 14

    def test_seed_codes_all_legal(self, seed_lexicon):
        for entry in seed_lexicon:
            assert validate(entry.code).ok, entry.label

    def test_alias_equality(self, seed_lexicon):
        assert lookup("insert", seed_lexicon) == lookup("pierce", seed_lexicon)
        assert render_code(lookup("insert", seed_lexicon)) == "11001010"

    def test_pour_rotate(self, seed_lexicon):
        assert lookup("pour", seed_lexicon) == lookup("rotate", seed_lexicon)

    def test_unknown_label(self, seed_lexicon):
        with pytest.raises(UnknownLabelError) as excinfo:
            lookup("teleport", seed_lexicon)
        assert excinfo.value.suggestions

    def test_normalization(self, seed_lexicon):
        assert lookup("  INSERT ", seed_lexicon) == lookup("insert", seed_lexicon)
        assert lookup("Pick-And-Place", seed_lexicon) == lookup("pick-and-place", seed_lexicon)

    def test_qualifier_stripped_unique(self, seed_lexicon):
        assert render_code(lookup("twist", seed_lexicon)) == "11110111"
        assert render_code(lookup("fold", seed_lexicon)) == "11111110"
        assert render_code(lookup("crack", seed_lexicon)) == "11110100"

    def test_qualifier_ambiguous(self, seed_lexicon):
        with pytest.raises(AmbiguousLabelError) as excinfo:
            lookup("push", seed_lexicon)
        assert any("push" in s for s in excinfo.value.suggestions)
        with pytest.raises(AmbiguousLabelError):
            lookup("roll", seed_lexicon)

    def test_qualified_rolls_differ(self, seed_lexicon):
        uni = lookup("roll (unimanual)", seed_lexicon)
        bi = lookup("roll (bimanual)", seed_lexicon)
        assert uni != bi
        assert code_distance(uni, bi) == 1.0  # manual bit only

    def test_duplicate_label_rejected(self):
        code = parse_code("10111010")
        with pytest.raises(ValueError):
            MotionLexicon(
                [
                    LexiconEntry("pick", (), code),
                    LexiconEntry("PICK", (), code),
                ]
            )

    def test_seed_source_marked(self, seed_lexicon):
        assert all(e.source == "builtin" for e in seed_lexicon)

    def test_save_load_round_trip(self, tmp_path, seed_lexicon):
        path = tmp_path / "lex.json"
        save_lexicon(seed_lexicon, path)
        reloaded = load_lexicon(path)
        assert [(e.label, e.aliases, e.code) for e in reloaded] == [
            (e.label, e.aliases, e.code) for e in seed_lexicon
        ]
        assert all(e.source == "user" for e in reloaded)

    def test_illegal_code_in_file_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps([{"label": "zap", "aliases": [], "code": "01000000"}]))
        with pytest.raises(ValueError):
            load_lexicon(path)


class TestLexiconVariants:
    def test_verbatim_default(self, seed_lexicon):
        assert render_code(lookup("shake", seed_lexicon)) == "00000100"
        assert render_code(lookup("pour", seed_lexicon)) == "00001000"

    def test_prose_corrected_swaps_non_contact_trajectory(self):
        lex = load_lexicon(variant="prose-corrected")
        assert render_code(lookup("shake", lex)) == "00001000"
        assert render_code(lookup("pour", lex)) == "00000100"

    def test_prose_corrected_leaves_contact_rows(self, seed_lexicon):
        lex = load_lexicon(variant="prose-corrected")
        for label in ("cut", "insert", "twist", "fold", "pick-and-place"):
            assert lookup(label, lex) == lookup(label, seed_lexicon)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ValueError):
            load_lexicon(variant="nonsense")


class TestConsolidate:
    def test_mixed_groups(self, seed_lexicon):
        result = consolidate(["cut", "chop", "slice", "pour"], seed_lexicon)
        assert result.groups["11111010"] == ("cut", "chop", "slice")
        assert result.groups["00001000"] == ("pour",)
        assert result.unknowns == ()

    def test_empty_input(self, seed_lexicon):
        result = consolidate([], seed_lexicon)
        assert result.groups == {}
        assert result.unknowns == ()

    def test_one_group_of_four(self, seed_lexicon):
        result = consolidate(["insert", "pierce", "mix", "stir"], seed_lexicon)
        assert len(result.groups) == 1
        assert result.groups["11001010"] == ("insert", "pierce", "mix", "stir")

    def test_unknowns_separate(self, seed_lexicon):
        result = consolidate(["cut", "teleport"], seed_lexicon)
        assert result.unknowns == ("teleport",)

    def test_partition_property(self, seed_lexicon):
        labels = ["cut", "chop", "pour", "Cut", "teleport", "insert", "stir", "  pour "]
        result = consolidate(labels, seed_lexicon)
        grouped = [l for group in result.groups.values() for l in group]
        all_out = grouped + list(result.unknowns)
        # disjoint groups, union == deduplicated input
        assert len(all_out) == len({normalize_label(l) for l in labels})
        assert {normalize_label(l) for l in all_out} == {normalize_label(l) for l in labels}

    def test_seed_group_bound(self, seed_lexicon):
        every_name = [n for e in seed_lexicon for n in e.names()]
        result = consolidate(every_name, seed_lexicon)
        assert len(result.groups) <= 14
        assert result.unknowns == ()


class TestDescribe:
    def test_caption_attributes(self):
        desc = describe_code(parse_code("10111010"))
        assert desc["contact"] == "contact"
        assert desc["engagement"] == "rigid"
        assert desc["subclass"] == "moving"
        assert desc["prismatic"] == "prismatic"
        assert desc["revolute"] == "non-revolute"
        assert desc["duration"] == "continuous"
        assert desc["manual"] == "unimanual"

    def test_non_contact(self):
        desc = describe_code(parse_code("00000100"))
        assert desc["contact"] == "non-contact"
        assert "not applicable" in desc["engagement"]


def test_normalize_and_strip_helpers():
    assert normalize_label("  Pick And  Place ") == "pick and place"
    assert strip_qualifier("roll (bimanual)") == "roll"
    assert strip_qualifier("twist (open/close container)") == "twist"
