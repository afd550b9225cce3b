"""Deterministic natural-language intent parsing plus an optional LLM adapter.

Parsing is two-stage.  Stage 1 is an exact grammar::

    <verb...> key=value [key=value ...]

where every leading word is a known verb for one tool and every remaining
token is a ``key=value`` pair.  Stage 2 is a keyword fallback: verb stems
pick the tool, user ids are matched token-wise against the roster, and
quantities are pulled out with number+unit patterns (Hz/kHz/MHz/GHz all
normalized to Hz).  Unparseable text yields a none-confidence parse.
"""

from __future__ import annotations

import logging
import re
import string
from dataclasses import dataclass, field

import requests

from .agent import ToolRegistry

logger = logging.getLogger(__name__)

VERB_STEMS = {
    "predict": "predict_future_qoe",
    "forecast": "predict_future_qoe",
    "history": "historical_qoe_query",
    "historical": "historical_qoe_query",
    "query": "historical_qoe_query",
    "realloc": "reallocate_bandwidth",
    "reallocate": "reallocate_bandwidth",
    "rebalance": "reallocate_bandwidth",
}

UNIT_SCALE = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}

BANDWIDTH_RE = re.compile(r"(\d+(?:\.\d+)?)\s*(ghz|mhz|khz|hz)\b", re.IGNORECASE)
EPOCH_RE = re.compile(r"\bepoch\s*[= ]\s*(\d+)", re.IGNORECASE)
USER_PHRASE_RE = re.compile(r"\buser\s+([A-Za-z0-9_\-]+)", re.IGNORECASE)
KEY_VALUE_RE = re.compile(r"^([a-z_]+)=(\S+)$", re.IGNORECASE)
AGGREGATES = ("mean", "min", "max", "series")


@dataclass(frozen=True)
class IntentParse:
    tool: str | None
    arguments: dict = field(default_factory=dict)
    confidence: str = "none"  # "exact" | "keyword" | "none"


def _strip_token(token: str) -> str:
    token = token.strip(string.punctuation + string.whitespace)
    if token.lower().endswith("'s"):
        token = token[:-2]
    return token


def _bandwidth_hz(text: str) -> float | None:
    m = BANDWIDTH_RE.search(text)
    if not m:
        return None
    return float(m.group(1)) * UNIT_SCALE[m.group(2).lower()]


def _exact_parse(text: str, registry: ToolRegistry) -> IntentParse | None:
    tokens = text.split()
    if not tokens:
        return None
    tools = set()
    i = 0
    while i < len(tokens) and tokens[i].lower() in VERB_STEMS:
        tools.add(VERB_STEMS[tokens[i].lower()])
        i += 1
    if i == 0 or len(tools) != 1:
        return None
    pairs = {}
    for token in tokens[i:]:
        m = KEY_VALUE_RE.match(token)
        if not m:
            return None
        pairs[m.group(1).lower()] = m.group(2)

    tool = tools.pop()
    args: dict = {}
    if "user" in pairs:
        args["user"] = pairs.pop("user")
    if "bandwidth" in pairs:
        raw = pairs.pop("bandwidth")
        hz = _bandwidth_hz(raw)
        args["bandwidth_hz"] = hz if hz is not None else float(raw)
    for key in ("epoch", "epoch_from", "epoch_to"):
        if key in pairs:
            args[key] = int(pairs.pop(key))
    if "aggregate" in pairs and pairs["aggregate"].lower() in AGGREGATES:
        args["aggregate"] = pairs.pop("aggregate").lower()
    for key in ("h_tar", "h_hig"):
        if key in pairs:
            args[key] = float(pairs.pop(key))
    if pairs:
        return None
    args = _conforming(tool, args, registry)
    return IntentParse(tool, args, "exact")


def _conforming(tool: str, args: dict, registry: ToolRegistry) -> dict:
    descriptor = registry.get(tool)
    if descriptor is None:
        return args
    known = {f.name: f for f in descriptor.parameters}
    return {k: v for k, v in args.items()
            if k in known and known[k].accepts(v)}


def parse_intent(text: str, registry: ToolRegistry | None = None,
                 roster=()) -> IntentParse:
    """Map an utterance to a tool call; deterministic and total."""
    registry = registry or ToolRegistry()
    exact = _exact_parse(text.strip(), registry)
    if exact is not None:
        return exact

    lowered = text.lower()
    tool = None
    for stem, name in VERB_STEMS.items():
        if stem in lowered:
            tool = name
            break
    if tool is None:
        return IntentParse(None, {}, "none")

    args: dict = {}
    roster_map = {uid.lower(): uid for uid in roster}
    for token in text.split():
        cleaned = _strip_token(token)
        if cleaned.lower() in roster_map:
            args["user"] = roster_map[cleaned.lower()]
            break
    if "user" not in args:
        m = USER_PHRASE_RE.search(text)
        if m:
            candidate = _strip_token(m.group(1))
            args["user"] = roster_map.get(candidate.lower(), candidate)

    hz = _bandwidth_hz(text)
    if hz is not None:
        args["bandwidth_hz"] = hz
    m = EPOCH_RE.search(text)
    if m:
        args["epoch"] = int(m.group(1))
    if tool == "historical_qoe_query":
        for word in AGGREGATES:
            if re.search(rf"\b{word}\b", lowered):
                args["aggregate"] = word
                break
    return IntentParse(tool, _conforming(tool, args, registry), "keyword")


@dataclass(frozen=True)
class LlmEndpointConfig:
    """External chat-completion endpoint; the feature is off by default."""

    url: str = ""
    enabled: bool = False
    timeout: float = 5.0
    model: str = ""


def llm_adapter_call(prompt: str, config: LlmEndpointConfig | None,
                     registry: ToolRegistry | None = None,
                     roster=()) -> IntentParse:
    """Ask an external endpoint for a tool selection, falling back on failure.

    The endpoint receives the tool descriptors and the user text and must
    answer ``{"tool": <name>, "arguments": {...}}``; anything else (or any
    transport error) falls back to the deterministic parser, so the
    pipeline never blocks on the network.
    """
    registry = registry or ToolRegistry()
    if config is None or not config.enabled or not config.url:
        return parse_intent(prompt, registry, roster)
    try:
        response = requests.post(
            config.url,
            json={"model": config.model, "prompt": prompt,
                  "tools": [d.to_dict() for d in registry.descriptors()]},
            timeout=config.timeout)
        response.raise_for_status()
        doc = response.json()
        tool = doc["tool"]
        arguments = doc.get("arguments", {})
        if registry.get(tool) is None or not isinstance(arguments, dict):
            raise ValueError("endpoint returned an unknown tool or bad arguments")
        if registry.validate_arguments(tool, arguments) is not None:
            raise ValueError("endpoint arguments violate the tool schema")
        return IntentParse(tool, arguments, "exact")
    except Exception as exc:
        logger.warning("LLM adapter failed (%s); using deterministic parser", exc)
        return parse_intent(prompt, registry, roster)
