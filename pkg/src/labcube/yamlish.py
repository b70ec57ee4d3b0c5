"""Deterministic loading of the YAML subset used by all framework documents.

Only mappings, sequences, and scalars are accepted; anchors, aliases, and
tags are rejected so a document always means exactly one thing. Every
scalar is returned as the raw string written in the document (no implicit
int/bool conversion), which is what makes parse/serialize round-trips
byte-faithful for field values.
"""

from __future__ import annotations

import json
from typing import Any

import yaml

from .errors import DocumentSyntaxError


class DuplicateKeyError(DocumentSyntaxError):
    """Same key twice in one mapping; `path` locates the mapping."""

    def __init__(self, key: str, line: int, path: tuple[str, ...]):
        self.key = key
        self.path = path
        super().__init__(line, f"duplicate key {key!r} in {'/'.join(path) or 'document'}")


def _reject_rich_syntax(text: str) -> None:
    try:
        for token in yaml.scan(text):
            if isinstance(token, (yaml.AnchorToken, yaml.AliasToken, yaml.TagToken)):
                raise DocumentSyntaxError(
                    token.start_mark.line + 1,
                    "anchors, aliases and tags are not part of the manifest format",
                )
    except yaml.YAMLError as exc:
        raise _syntax_error(exc) from exc


def _syntax_error(exc: yaml.YAMLError) -> DocumentSyntaxError:
    mark = getattr(exc, "problem_mark", None)
    line = (mark.line + 1) if mark is not None else 0
    return DocumentSyntaxError(line, getattr(exc, "problem", None) or str(exc))


def _build(node: yaml.Node, path: tuple[str, ...]) -> Any:
    if isinstance(node, yaml.ScalarNode):
        return node.value
    if isinstance(node, yaml.SequenceNode):
        return [_build(child, path + (f"[{i}]",)) for i, child in enumerate(node.value)]
    if isinstance(node, yaml.MappingNode):
        out: dict[str, Any] = {}
        for key_node, value_node in node.value:
            if not isinstance(key_node, yaml.ScalarNode):
                raise DocumentSyntaxError(
                    key_node.start_mark.line + 1, "mapping keys must be scalars"
                )
            key = key_node.value
            if key in out:
                raise DuplicateKeyError(key, key_node.start_mark.line + 1, path)
            out[key] = _build(value_node, path + (key,))
        return out
    raise DocumentSyntaxError(node.start_mark.line + 1, f"unsupported node {node.id}")


def load_document(text: str) -> Any:
    """Parse one document of the subset; scalars come back as strings."""
    _reject_rich_syntax(text)
    try:
        node = yaml.compose(text, Loader=yaml.BaseLoader)
    except yaml.YAMLError as exc:
        raise _syntax_error(exc) from exc
    if node is None:
        return None
    return _build(node, ())


def load_mapping(text: str) -> dict[str, Any]:
    value = load_document(text)
    if not isinstance(value, dict):
        raise DocumentSyntaxError(1, "top level of the document must be a mapping")
    return value


def _quote(scalar: str) -> str:
    # JSON string syntax is valid YAML double-quoted style; quoting every
    # leaf keeps "001" and friends from ever being re-read as numbers.
    return json.dumps(scalar, ensure_ascii=False)


def dump(value: Any, indent: int = 0) -> str:
    """Serialize mappings, sequences, and scalar strings deterministically.

    Mapping values get block form; sequence items use flow form, so any
    depth of nesting stays unambiguous without indentation gymnastics.
    """
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return pad + "{}\n"
        lines = []
        for key, item in value.items():
            if isinstance(item, dict) and item:
                lines.append(f"{pad}{key}:\n{dump(item, indent + 1)}")
            elif isinstance(item, list) and item:
                body = "".join(f"{pad}  - {_inline(entry)}\n" for entry in item)
                lines.append(f"{pad}{key}:\n{body}")
            else:
                lines.append(f"{pad}{key}: {_inline(item)}\n")
        return "".join(lines)
    if isinstance(value, list):
        if not value:
            return pad + "[]\n"
        return "".join(f"{pad}- {_inline(item)}\n" for item in value)
    return pad + _inline(value) + "\n"


def _inline(value: Any) -> str:
    if isinstance(value, dict):
        if not value:
            return "{}"
        inner = ", ".join(f"{k}: {_inline(v)}" for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        return "[" + ", ".join(_inline(v) for v in value) + "]"
    return _quote(str(value))
