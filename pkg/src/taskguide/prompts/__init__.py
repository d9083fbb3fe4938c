"""Prompt templates shipped with the package.

Templates are plain text with ``<<TOKEN>>`` placeholders; substitution is a
literal replace, so template bodies may freely contain braces, JSON, and
fenced blocks without escaping.
"""

from __future__ import annotations

from importlib import resources
from typing import Mapping


def load_template(name: str) -> str:
    return (resources.files("taskguide") / "prompts" / name).read_text()


def render_template(name: str, values: Mapping[str, str]) -> str:
    text = load_template(name)
    for token, value in values.items():
        text = text.replace(f"<<{token}>>", value)
    return text
