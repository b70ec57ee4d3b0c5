"""Locations of the shipped catalog, templates, and default config files."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def data_dir() -> Path:
    return Path(str(resources.files("labcube").joinpath("data")))


def default_catalog_dir() -> Path:
    return data_dir() / "stacks"


def default_template_root() -> Path:
    return data_dir() / "templates"


def default_networks_path() -> Path:
    return data_dir() / "networks.yaml"


def default_hosts_path() -> Path:
    return data_dir() / "hosts.yaml"


def default_settings_path() -> Path:
    return data_dir() / "settings.env"


def default_subscribers_path() -> Path:
    return data_dir() / "subscribers.env"
