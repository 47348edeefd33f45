#!/usr/bin/env python3
"""Regenerate contracts/prediction_responses.json from the label table.

These fixtures pin the prediction-response wire format shared by the
HTTP service and the analysis-tool plugin; both test suites consume the
same file.
"""
import json
from pathlib import Path

from archid.binfmt import ARCHITECTURES

OUT = Path(__file__).resolve().parent.parent / "contracts" / "prediction_responses.json"


def main():
    OUT.parent.mkdir(parents=True, exist_ok=True)
    responses = {}
    for i, (name, (endianness, wordsize)) in enumerate(sorted(ARCHITECTURES.items())):
        responses[name] = {
            "prediction": {
                "architecture": name,
                "endianness": endianness,
                "wordsize": wordsize,
            },
            # Arbitrary but fixed probabilities, all in (0, 1].
            "prediction_probability": round(0.62 + 0.015 * i, 4),
        }
    OUT.write_text(json.dumps(responses, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
