"""Tool registry, schema validation, and request dispatch for the agent boundary.

Three tools cross the service/network domain boundary:

* ``predict_future_qoe``    QoE prediction for a user at a candidate bandwidth
* ``historical_qoe_query``  aggregation over a user's recorded QoE history
* ``reallocate_bandwidth``  one donor/receiver pass over the current allocation

Requests and responses are JSON documents (see ``server`` for framing):

    {"id": "1", "method": "tools/list"}
    {"id": "2", "method": "tools/call",
     "params": {"name": "...", "arguments": {...}}}
    -> {"id": "2", "result": {...}} | {"id": "2", "error": {"code": c, "message": m}}

Only derived values (QoE scalars, bandwidths, epochs, roles) ever appear in
a response; raw pose rows stay inside the service domain.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace

from .allocate import AllocationParams, reallocate
from .errors import MarqoeError
from .simulation import SimulationContext
from .ucr import UserContextStore, query_history

logger = logging.getLogger(__name__)

# Error codes follow the JSON-RPC numbering convention.
PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32000

FIELD_TYPES = ("string", "number", "integer", "boolean", "object", "array")
PARAM_TYPES = ("string", "number", "integer", "boolean")
_PY_TYPES = {
    "string": str,
    "number": (int, float),
    "integer": int,
    "boolean": bool,
    "object": dict,
    "array": list,
}


@dataclass(frozen=True)
class SchemaField:
    name: str
    type: str
    required: bool = False
    units: str = ""

    def accepts(self, value) -> bool:
        if self.type in ("number", "integer") and isinstance(value, bool):
            return False
        return isinstance(value, _PY_TYPES[self.type])


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    description: str
    parameters: tuple[SchemaField, ...]
    results: tuple[SchemaField, ...]

    def to_dict(self) -> dict:
        def fields(items):
            return [{"name": f.name, "type": f.type, "required": f.required,
                     "units": f.units} for f in items]
        return {"name": self.name, "description": self.description,
                "parameter_schema": fields(self.parameters),
                "result_schema": fields(self.results)}


def descriptor_schema_ok(descriptor: ToolDescriptor) -> bool:
    """Meta-schema check: typed fields, parameters restricted to primitives."""
    names = [f.name for f in descriptor.parameters]
    if len(names) != len(set(names)):
        return False
    if any(f.type not in PARAM_TYPES for f in descriptor.parameters):
        return False
    return all(f.type in FIELD_TYPES for f in descriptor.results)


def default_descriptors() -> tuple[ToolDescriptor, ...]:
    return (
        ToolDescriptor(
            "predict_future_qoe",
            "Predict a user's mean hit-rate QoE for an epoch at a candidate "
            "uplink bandwidth.",
            parameters=(
                SchemaField("user", "string", required=True),
                SchemaField("bandwidth_hz", "number", required=True, units="Hz"),
                SchemaField("epoch", "integer", units="epoch index"),
            ),
            results=(
                SchemaField("user", "string", required=True),
                SchemaField("bandwidth_hz", "number", required=True, units="Hz"),
                SchemaField("epoch", "integer", required=True),
                SchemaField("value", "number", required=True, units="QoE in [0,1]"),
                SchemaField("kind", "string", required=True),
            ),
        ),
        ToolDescriptor(
            "historical_qoe_query",
            "Retrieve or aggregate a user's recorded per-epoch QoE history.",
            parameters=(
                SchemaField("user", "string", required=True),
                SchemaField("epoch_from", "integer"),
                SchemaField("epoch_to", "integer"),
                SchemaField("aggregate", "string",
                            units="mean | min | max | series"),
            ),
            results=(
                SchemaField("user", "string", required=True),
                SchemaField("aggregate", "string", required=True),
                SchemaField("value", "number"),
                SchemaField("series", "array"),
            ),
        ),
        ToolDescriptor(
            "reallocate_bandwidth",
            "Run one donor/receiver reallocation pass over the current "
            "bandwidth allocation.",
            parameters=(
                SchemaField("epoch", "integer", units="epoch index"),
                SchemaField("h_tar", "number"),
                SchemaField("h_hig", "number"),
            ),
            results=(
                SchemaField("epoch", "integer", required=True),
                SchemaField("new_bandwidths_hz", "object", required=True, units="Hz"),
                SchemaField("donors", "object", required=True, units="released Hz"),
                SchemaField("receivers", "object", required=True, units="granted Hz"),
                SchemaField("surplus_hz", "number", required=True, units="Hz"),
                SchemaField("total_deficit", "number", required=True),
            ),
        ),
    )


class ToolRegistry:
    def __init__(self, descriptors=None):
        self._tools: dict[str, ToolDescriptor] = {}
        for d in (descriptors or default_descriptors()):
            if d.name in self._tools:
                raise ValueError(f"duplicate tool name {d.name!r}")
            self._tools[d.name] = d

    def descriptors(self) -> list[ToolDescriptor]:
        return list(self._tools.values())

    def get(self, name: str) -> ToolDescriptor | None:
        return self._tools.get(name)

    def validate_arguments(self, name: str, arguments: dict) -> str | None:
        """Return a message naming the offending field, or None when valid."""
        tool = self._tools[name]
        known = {f.name: f for f in tool.parameters}
        for key in arguments:
            if key not in known:
                return f"unknown argument {key!r}"
        for f in tool.parameters:
            if f.name in arguments:
                if not f.accepts(arguments[f.name]):
                    return f"argument {f.name!r} must be of type {f.type}"
            elif f.required:
                return f"missing required argument {f.name!r}"
        return None


class ToolServer:
    """Dispatches protocol messages onto the simulation context and the UCR.

    Holds the current bandwidth allocation (uniform at start); the
    reallocation tool advances it.  Safe for concurrent ``handle`` calls.
    """

    def __init__(self, ctx: SimulationContext, store: UserContextStore,
                 alloc_params: AllocationParams | None = None,
                 registry: ToolRegistry | None = None):
        self.ctx = ctx
        self.store = store
        self.registry = registry or ToolRegistry()
        self.alloc_params = alloc_params or AllocationParams()
        users = ctx.user_ids()
        share = self.alloc_params.total_bandwidth / len(users)
        self.bandwidths = {u: share for u in users}
        self._alloc_lock = threading.Lock()

    # -- protocol ---------------------------------------------------------

    def handle(self, message) -> dict:
        if not isinstance(message, dict):
            return _error(None, INVALID_REQUEST, "request must be an object")
        req_id = message.get("id")
        if req_id is None or not isinstance(req_id, (str, int)):
            return _error(None, INVALID_REQUEST, "missing or invalid id")
        method = message.get("method")
        if method == "tools/list":
            return {"id": req_id,
                    "result": {"tools": [d.to_dict()
                                         for d in self.registry.descriptors()]}}
        if method != "tools/call":
            return _error(req_id, METHOD_NOT_FOUND, f"unknown method {method!r}")

        params = message.get("params")
        if not isinstance(params, dict) or not isinstance(params.get("name"), str):
            return _error(req_id, INVALID_REQUEST, "params.name missing")
        name = params["name"]
        arguments = params.get("arguments", {})
        if not isinstance(arguments, dict):
            return _error(req_id, INVALID_PARAMS, "arguments must be an object")
        if self.registry.get(name) is None:
            return _error(req_id, METHOD_NOT_FOUND, f"unknown tool {name!r}")
        problem = self.registry.validate_arguments(name, arguments)
        if problem is not None:
            return _error(req_id, INVALID_PARAMS, problem)
        try:
            result = self._dispatch(name, arguments)
        except MarqoeError as exc:
            return _error(req_id, INTERNAL_ERROR,
                          f"{type(exc).__name__}: {exc}")
        except Exception as exc:  # sanitized: no internals cross the boundary
            logger.exception("tool %s failed", name)
            return _error(req_id, INTERNAL_ERROR, f"{type(exc).__name__}")
        return {"id": req_id, "result": result}

    # -- tools ------------------------------------------------------------

    def _dispatch(self, name: str, args: dict) -> dict:
        if name == "predict_future_qoe":
            return self._predict(args)
        if name == "historical_qoe_query":
            return self._history(args)
        return self._reallocate(args)

    def _default_epoch(self, user: str) -> int:
        try:
            record = self.store.get(user)
            if record.history:
                return record.history[-1].epoch + 1
        except MarqoeError:
            pass
        return 1

    def _predict(self, args: dict) -> dict:
        user = args["user"]
        epoch = args.get("epoch", self._default_epoch(user))
        estimate = self.ctx.predict(user, float(args["bandwidth_hz"]), epoch)
        return {"user": user, "bandwidth_hz": estimate.bandwidth_hz,
                "epoch": estimate.epoch, "value": estimate.value,
                "kind": estimate.kind}

    def _history(self, args: dict) -> dict:
        user = args["user"]
        aggregate = args.get("aggregate", "series")
        value = query_history(self.store, user, args.get("epoch_from"),
                              args.get("epoch_to"), aggregate)
        out = {"user": user, "aggregate": aggregate}
        if aggregate == "series":
            out["series"] = value
        else:
            out["value"] = value
        return out

    def _reallocate(self, args: dict) -> dict:
        params = self.alloc_params
        if "h_tar" in args or "h_hig" in args:
            params = replace(params,
                             target_qoe=args.get("h_tar", params.target_qoe),
                             high_qoe=args.get("h_hig", params.high_qoe))
        with self._alloc_lock:
            epoch = args.get("epoch",
                             min(self._default_epoch(u) for u in self.bandwidths))
            result = reallocate(
                self.bandwidths, params,
                predict_fn=lambda u, b: self.ctx.predict(u, b, epoch).value,
                tiers_fn=self.ctx.tier_bandwidths)
            self.bandwidths = dict(result.new_bandwidths)
        return {"epoch": epoch,
                "new_bandwidths_hz": result.new_bandwidths,
                "donors": result.donors,
                "receivers": result.receivers,
                "surplus_hz": result.surplus,
                "total_deficit": result.total_deficit}


def _error(req_id, code: int, message: str) -> dict:
    return {"id": req_id, "error": {"code": code, "message": message}}
