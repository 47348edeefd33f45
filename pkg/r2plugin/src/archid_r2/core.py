"""Identification flow: read the open binary, ask the service, configure r2.

Pure logic kept separate from radare2 imports so it can run against any
object exposing `cmd(str) -> str`.  Configuration is all-or-nothing:
nothing is written to the tool until the service response has parsed
and validated completely.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import requests

from .archmap import ARCH_TO_R2

DEFAULT_API_URL = "http://localhost:5000/binary/"
DEFAULT_API_KEY = "testkey"

API_URL_ENV = "ARCHID_R2_API_URL"
API_KEY_ENV = "ARCHID_R2_API_KEY"


@dataclass(frozen=True)
class PluginConfig:
    api_url: str = DEFAULT_API_URL
    api_key: str = DEFAULT_API_KEY

    def __post_init__(self):
        if not (self.api_url.endswith("/binary/") or self.api_url.endswith("/binary")):
            raise ValueError(f"api_url must end with /binary/ or /binary: {self.api_url!r}")

    @classmethod
    def from_env(cls) -> "PluginConfig":
        return cls(
            api_url=os.environ.get(API_URL_ENV, DEFAULT_API_URL),
            api_key=os.environ.get(API_KEY_ENV, DEFAULT_API_KEY),
        )


def read_open_file_bytes(pipe) -> bytes | None:
    """On-disk bytes of the binary currently open in the tool."""
    try:
        info = json.loads(pipe.cmd("ij"))
        path = info["core"]["file"]
        with open(path, "rb") as fh:
            return fh.read()
    except Exception:
        return None


def parse_prediction(payload: dict):
    """Validated (architecture, endianness, wordsize, probability) or None."""
    try:
        prediction = payload["prediction"]
        architecture = prediction["architecture"]
        endianness = prediction["endianness"]
        wordsize = prediction["wordsize"]
        probability = payload["prediction_probability"]
    except (KeyError, TypeError):
        return None
    if not isinstance(architecture, str) or architecture not in ARCH_TO_R2:
        return None
    if endianness not in ("little", "big"):
        return None
    if wordsize not in (32, 64):
        return None
    if not isinstance(probability, (int, float)) or not 0.0 <= float(probability) <= 1.0:
        return None
    return architecture, endianness, int(wordsize), float(probability)


def configure_tool(pipe, architecture: str, endianness: str, wordsize: int) -> None:
    pipe.cmd(f"e asm.arch={ARCH_TO_R2[architecture]}")
    pipe.cmd("e cfg.bigendian=true" if endianness == "big" else "e cfg.bigendian=false")
    pipe.cmd(f"e asm.bits={wordsize}")


def run_identification(pipe, config: PluginConfig, output=print) -> bool:
    """Classify the open binary and set arch, endianness and bit width.

    Returns True when the tool was configured.  Any failure leaves the
    tool state untouched and prints a single diagnostic line.
    """
    data = read_open_file_bytes(pipe)
    if not data:
        output("Error identifying the architecture")
        return False

    try:
        response = requests.post(
            config.api_url,
            files={"binary": ("binary", data)},
            data={"api_key": config.api_key},
            timeout=60,
        )
    except requests.exceptions.RequestException:
        output("Error identifying the architecture")
        return False

    try:
        payload = response.json()
    except ValueError:
        output("Unable to identify architecture")
        return False
    if response.status_code != 200:
        output("Unable to identify architecture")
        return False
    parsed = parse_prediction(payload)
    if parsed is None:
        output("Unable to identify architecture")
        return False

    architecture, endianness, wordsize, probability = parsed
    output(f"Architecture: {architecture}")
    output(f"Endianness: {endianness}")
    output(f"Word size: {wordsize}")
    output(f"Prediction probability: {probability}")
    configure_tool(pipe, architecture, endianness, wordsize)
    return True
