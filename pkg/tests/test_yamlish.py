import pytest

from labcube.errors import DocumentSyntaxError
from labcube.yamlish import DuplicateKeyError, dump, load_document, load_mapping


class TestLoadDocument:
    def test_scalars_stay_strings(self):
        doc = load_mapping("a: 001\nb: true\nc: 1.5\n")
        assert doc == {"a": "001", "b": "true", "c": "1.5"}

    def test_quoted_scalars_unescaped(self):
        assert load_mapping('a: "x\\ny"')["a"] == "x\ny"

    def test_nested_structures(self):
        doc = load_mapping("a:\n  - {x: 1, y: [p, q]}\n")
        assert doc == {"a": [{"x": "1", "y": ["p", "q"]}]}

    def test_duplicate_key_reports_path(self):
        with pytest.raises(DuplicateKeyError) as err:
            load_mapping("top:\n  k: 1\n  k: 2\n")
        assert err.value.key == "k"
        assert err.value.path == ("top",)

    def test_anchor_rejected(self):
        with pytest.raises(DocumentSyntaxError):
            load_document("a: &anchor 1\nb: *anchor\n")

    def test_tag_rejected(self):
        with pytest.raises(DocumentSyntaxError):
            load_document("a: !!int 5\n")

    def test_scanner_error_carries_line(self):
        with pytest.raises(DocumentSyntaxError) as err:
            load_document("a: [unclosed\nb: }\n")
        assert err.value.line >= 1

    def test_top_level_must_be_mapping(self):
        with pytest.raises(DocumentSyntaxError):
            load_mapping("- just\n- a list\n")


class TestDump:
    def test_round_trips_structures(self):
        doc = {
            "name": "x",
            "empty_map": {},
            "empty_list": [],
            "list": [{"a": "1"}, ["x", "y"], "scalar"],
            "nested": {"deep": {"value": 'quote " and \\'}},
        }
        assert load_mapping(dump(doc)) == {
            "name": "x",
            "empty_map": {},
            "empty_list": [],
            "list": [{"a": "1"}, ["x", "y"], "scalar"],
            "nested": {"deep": {"value": 'quote " and \\'}},
        }

    def test_numbers_survive_as_strings(self):
        assert load_mapping(dump({"v": "0755"}))["v"] == "0755"
