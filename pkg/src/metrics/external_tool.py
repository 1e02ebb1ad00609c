"""
Hook for an external perceptual-quality scorer (a PESQ build or anything
with the same calling convention).

The tool is run as `<tool> <reference.wav> <degraded.wav>` and must print
its score; the last number on its output is taken as the MOS-LQO value.
"""
import logging
import re
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Union

from src.audio.audio_io import write_wav
from src.audio.codecs import EncodedStream, decode_stream
from src.errors import ExternalToolError

logger = logging.getLogger(__name__)

_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?")
DEFAULT_TIMEOUT_S = 120.0


def parse_score(output: str) -> float:
    numbers = _NUMBER.findall(output)
    if not numbers:
        raise ExternalToolError(f"no score in tool output: {output.strip()[:200]!r}")
    return float(numbers[-1])


def run_quality_tool(tool: str, reference: Union[str, Path], degraded: Union[str, Path],
                     timeout_s: float = DEFAULT_TIMEOUT_S) -> float:
    command = shlex.split(tool) + [str(reference), str(degraded)]
    logger.debug("running %s", " ".join(command))
    try:
        result = subprocess.run(command, capture_output=True, text=True, timeout=timeout_s)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ExternalToolError(f"cannot run {command[0]}: {exc}") from exc
    if result.returncode != 0:
        raise ExternalToolError(
            f"{command[0]} exited with {result.returncode}: {result.stderr.strip()[:200]}"
        )
    return parse_score(result.stdout)


def score_streams(tool: str, cover: EncodedStream, stego: EncodedStream,
                  timeout_s: float = DEFAULT_TIMEOUT_S) -> float:
    """Decode both streams to WAV files and score the stego one against the cover."""
    with tempfile.TemporaryDirectory(prefix="stego-mos-") as tmp:
        reference = Path(tmp) / "cover.wav"
        degraded = Path(tmp) / "stego.wav"
        write_wav(decode_stream(cover), reference)
        write_wav(decode_stream(stego), degraded)
        score = run_quality_tool(tool, reference, degraded, timeout_s)
    logger.info("external MOS-LQO score %.3f", score)
    return score
