import json
import random
import string

import pytest

from tooltrain import (
    ParsedGeneration,
    ToolCall,
    ToolSchema,
    parse_generation,
    render_generation,
    validate_format,
)

SCHEMA = ToolSchema.from_dict([
    {"name": "f", "description": "", "parameters": {
        "x": {"description": "", "type": "int"},
        "y": {"description": "", "type": "str", "default": "a"},
    }},
    {"name": "g", "description": "", "parameters": {}},
])


def rule_ids(violations):
    return sorted(v.rule_id for v in violations)


class TestParse:
    def test_minimal_well_formed(self):
        parsed = parse_generation(
            '<think>x</think><tool_call>{"name":"f","arguments":{}}</tool_call>')
        assert parsed.think == "x"
        assert parsed.tool_calls == [ToolCall("f", {})]
        assert parsed.raw_errors == []
        assert parsed.response_text == ""

    def test_two_think_pairs_is_rule_1(self):
        parsed = parse_generation("<think>a</think><think>b</think>hello")
        assert rule_ids(parsed.raw_errors) == [1]
        assert parsed.response_text == "hello"
        assert parsed.think == "a"

    def test_plain_text_answer(self):
        parsed = parse_generation("<think>t</think>The ICAO code is KSFO.")
        assert parsed.think == "t"
        assert parsed.tool_calls == []
        assert parsed.raw_errors == []
        assert parsed.response_text == "The ICAO code is KSFO."

    def test_missing_think_is_rule_1(self):
        parsed = parse_generation("no reasoning here")
        assert rule_ids(parsed.raw_errors) == [1]

    def test_unclosed_think_is_rule_1(self):
        parsed = parse_generation("<think>forever")
        assert rule_ids(parsed.raw_errors) == [1]
        assert parsed.think is None

    def test_stray_tool_close_is_rule_2(self):
        parsed = parse_generation("<think>t</think></tool_call>")
        assert rule_ids(parsed.raw_errors) == [2]

    def test_unclosed_tool_call_is_rule_2(self):
        parsed = parse_generation('<think>t</think><tool_call>{"name"')
        assert rule_ids(parsed.raw_errors) == [2]
        assert parsed.tool_calls == []

    def test_bad_json_payload_is_rule_3(self):
        parsed = parse_generation("<think>t</think><tool_call>{oops</tool_call>")
        assert rule_ids(parsed.raw_errors) == [3]

    def test_extra_top_level_key_is_rule_3(self):
        parsed = parse_generation(
            '<think>t</think>'
            '<tool_call>{"name":"f","arguments":{},"id":1}</tool_call>')
        assert rule_ids(parsed.raw_errors) == [3]

    def test_payload_not_an_object_is_rule_3(self):
        parsed = parse_generation("<think>t</think><tool_call>[1,2]</tool_call>")
        assert rule_ids(parsed.raw_errors) == [3]

    def test_calls_preserve_source_order(self):
        parsed = parse_generation(
            '<think>t</think>'
            '<tool_call>{"name":"f","arguments":{"x":1}}</tool_call>'
            '<tool_call>{"name":"g","arguments":{}}</tool_call>')
        assert [c.name for c in parsed.tool_calls] == ["f", "g"]

    def test_interleaved_text_goes_to_response(self):
        parsed = parse_generation(
            '<think>t</think>before '
            '<tool_call>{"name":"g","arguments":{}}</tool_call> after')
        assert parsed.response_text == "before  after"

    def test_tag_inside_call_string_value_is_content(self):
        parsed = parse_generation(
            '<think>t</think>'
            '<tool_call>{"name":"f","arguments":{"y":"<think>"}}</tool_call>')
        assert parsed.raw_errors == []
        assert parsed.tool_calls[0].arguments == {"y": "<think>"}


class TestValidate:
    def test_declared_call_with_subset_arguments(self):
        parsed = parse_generation(
            '<think>t</think><tool_call>{"name":"f","arguments":{"x":1}}</tool_call>')
        check = validate_format(parsed, SCHEMA)
        assert check.reward == 1 and check.violations == []

    def test_undeclared_function_is_rule_4(self):
        parsed = parse_generation(
            '<think>t</think><tool_call>{"name":"h","arguments":{}}</tool_call>')
        check = validate_format(parsed, SCHEMA)
        assert check.reward == 0
        assert rule_ids(check.violations) == [4]

    def test_extra_argument_key_is_rule_5(self):
        parsed = parse_generation(
            '<think>t</think>'
            '<tool_call>{"name":"f","arguments":{"x":1,"z":2}}</tool_call>')
        check = validate_format(parsed, SCHEMA)
        assert check.reward == 0
        assert rule_ids(check.violations) == [5]

    def test_no_calls_and_empty_response_is_valid(self):
        check = validate_format(parse_generation("<think>t</think>"), SCHEMA)
        assert check.reward == 1

    def test_reward_is_one_exactly_when_no_violations(self):
        rng = random.Random(5)
        for _ in range(300):
            text = _random_text(rng)
            check = validate_format(parse_generation(text), SCHEMA)
            assert check.reward == (1 if not check.violations else 0)


def _random_text(rng: random.Random) -> str:
    pieces = []
    for _ in range(rng.randint(0, 8)):
        pieces.append(rng.choice([
            "<think>", "</think>", "<tool_call>", "</tool_call>",
            '{"name":"f","arguments":{}}', '{"name":"h","arguments":{}}',
            '{"name":"f","arguments":{"z":1}}', "plain words ",
            "".join(rng.choices(string.printable, k=rng.randint(0, 12))),
        ]))
    return "".join(pieces)


def test_parse_is_total_on_random_strings():
    # fuzz 10^4 arbitrary strings; parsing must never raise
    rng = random.Random(123)
    alphabet = string.printable + "<>think/tool_callé中"
    for _ in range(10_000):
        text = "".join(rng.choices(alphabet, k=rng.randint(0, 60)))
        parsed = parse_generation(text)
        assert isinstance(parsed.response_text, str)


def _random_clean_structure(rng: random.Random) -> ParsedGeneration:
    words = ["alpha", "beta", "gamma", "delta", "42"]
    think = " ".join(rng.choices(words, k=rng.randint(1, 4)))
    calls = []
    for _ in range(rng.randint(0, 3)):
        args = {}
        for key in rng.sample(["x", "y", "z"], k=rng.randint(0, 3)):
            args[key] = rng.choice([1, 2.5, True, None, "word", [1, "two"],
                                    {"k": 3}])
        calls.append(ToolCall(rng.choice(["f", "g"]), args))
    response = " ".join(rng.choices(words, k=rng.randint(0, 4)))
    return ParsedGeneration(think=think, tool_calls=calls,
                            response_text=response, raw_errors=[])


def test_render_parse_round_trip():
    rng = random.Random(7)
    for _ in range(300):
        original = _random_clean_structure(rng)
        reparsed = parse_generation(render_generation(original))
        assert reparsed.raw_errors == []
        assert reparsed.think == original.think
        assert reparsed.tool_calls == original.tool_calls
        assert reparsed.response_text == original.response_text


class TestSchema:
    def test_duplicate_function_names_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            ToolSchema.from_dict([{"name": "f", "parameters": {}},
                                  {"name": "f", "parameters": {}}])

    def test_from_json_accepts_tools_block_lines(self):
        text = "\n".join(json.dumps(entry) for entry in [
            {"name": "a", "description": "", "parameters": {}},
            {"name": "b", "description": "", "parameters": {
                "p": {"description": "", "type": "str", "default": "05"}}},
        ])
        schema = ToolSchema.from_json(text)
        assert schema.function_names == ["a", "b"]
        assert schema.get("b").parameters["p"].has_default

    def test_default_absent_vs_present(self):
        schema = ToolSchema.from_json(json.dumps([
            {"name": "a", "parameters": {
                "req": {"type": "str"},
                "opt": {"type": "str", "default": ""}}},
        ]))
        params = schema.get("a").parameters
        assert not params["req"].has_default
        assert params["opt"].has_default and params["opt"].default == ""

    def test_round_trips_through_to_dict(self):
        schema = ToolSchema.from_dict(
            [{"name": "a", "description": "d", "parameters": {
                "p": {"description": "x", "type": "int", "default": 3}}}])
        again = ToolSchema.from_dict(schema.to_dict())
        assert again.to_dict() == schema.to_dict()
