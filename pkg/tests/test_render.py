import pytest

from bridgekit.errors import MissingTemplate
from bridgekit.kg import invert_relation
from bridgekit.render import DEFAULT_TEMPLATES, load_templates, render_text, save_templates

from conftest import mk_path


def test_render_anchor_art_gallery():
    assert render_text(mk_path("art_gallery", "UsedFor", "art")) == "art gallery is used for art"


def test_render_anchor_sand_to_puppy():
    p = mk_path("sand", "AtLocation", "beach", "_UsedFor", "walk", "_Desires", "puppy")
    assert render_text(p) == "sand is at location beach belongs to walk is desired by puppy"


def test_render_missing_template():
    with pytest.raises(MissingTemplate):
        render_text(mk_path("a", "NotARelation", "b"))


def test_render_no_trailing_punctuation_or_double_spaces():
    p = mk_path("big_red_dog", "Desires", "long_walk")
    text = render_text(p)
    assert text == "big red dog desires long walk"
    assert "  " not in text
    assert not text[-1] in ".!?"


def test_render_contains_concept_words_in_order():
    p = mk_path("sand", "AtLocation", "beach", "_UsedFor", "walk")
    words = render_text(p).split()
    pos = -1
    for concept in p.nodes:
        for w in concept.split("_"):
            pos = words.index(w, pos + 1)


def test_inverse_templates_differ_from_forward():
    for rel, text in DEFAULT_TEMPLATES.items():
        if rel.startswith("_"):
            continue
        inv = invert_relation(rel)
        assert inv in DEFAULT_TEMPLATES
        assert DEFAULT_TEMPLATES[inv] != text


def test_template_table_round_trip(tmp_path):
    path = tmp_path / "templates.tsv"
    save_templates(DEFAULT_TEMPLATES, path)
    table = load_templates(path)
    assert table == DEFAULT_TEMPLATES
    # overrides replace defaults
    path2 = tmp_path / "override.tsv"
    path2.write_text("UsedFor\tserves for\nMyRel\tdoes things to\n")
    table2 = load_templates(path2)
    assert table2["UsedFor"] == "serves for"
    assert table2["MyRel"] == "does things to"
    assert table2["IsA"] == DEFAULT_TEMPLATES["IsA"]
