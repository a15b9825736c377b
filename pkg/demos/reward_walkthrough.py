"""Walk through the graded reward on three representative scoring cases.

Run: python demos/reward_walkthrough.py
"""

from tooltrain import ToolSchema, parse_generation, total_reward

SCHEMA = ToolSchema.from_dict([
    {"name": "check_wordpress", "description": "Check whether a site runs WordPress.",
     "parameters": {"url": {"description": "URL to inspect", "type": "str"},
                    "user_agent": {"description": "UA header", "type": "str",
                                   "default": "Mozilla/5.0"}}},
    {"name": "label_template_brands", "description": "List label sheet brands.",
     "parameters": {"format": {"description": "paper format", "type": "str"}}},
    {"name": "airportstatistics", "description": "Airport statistics lookup.",
     "parameters": {"iata": {"description": "IATA code", "type": "str"}}},
])

CASES = [
    ("missing optional argument -> partial credit",
     '<think>check the site</think>\n<tool_call>\n{"name": "check_wordpress", '
     '"arguments": {"url": "https://example.com"}}\n</tool_call>',
     '<think>check the site</think>\n<tool_call>\n{"name": "check_wordpress", '
     '"arguments": {"url": "https://example.com", "user_agent": "Mozilla/5.0"}}'
     '\n</tool_call>'),
    ("letter-case difference in a string argument -> full credit",
     '<think>list the brands</think>\n<tool_call>\n{"name": "label_template_brands", '
     '"arguments": {"format": "a4"}}\n</tool_call>',
     '<think>list the brands</think>\n<tool_call>\n{"name": "label_template_brands", '
     '"arguments": {"format": "A4"}}\n</tool_call>'),
    ("redundant call where a plain answer was expected -> zero",
     '<think>look it up again</think>\n<tool_call>\n{"name": "airportstatistics", '
     '"arguments": {"iata": "SFO"}}\n</tool_call>',
     '<think>the answer is already known</think>\nThe ICAO code for SFO is KSFO, '
     'and it has 4 runways.'),
    ("missing think block -> format gate fires",
     '<tool_call>\n{"name": "airportstatistics", "arguments": {"iata": "SFO"}}'
     '\n</tool_call>',
     '<think>ok</think>\n<tool_call>\n{"name": "airportstatistics", '
     '"arguments": {"iata": "SFO"}}\n</tool_call>'),
]


def main() -> None:
    for title, generation, ground_truth in CASES:
        print("=" * 72)
        print(title)
        parsed = parse_generation(generation)
        print(f"  parsed: {len(parsed.tool_calls)} call(s), "
              f"response_text={parsed.response_text!r}, "
              f"violations={[v.rule_id for v in parsed.raw_errors]}")
        b = total_reward(generation, ground_truth, SCHEMA)
        print(f"  r_format={b.r_format} r_fc={b.r_fc:.3f} "
              f"r_response={b.r_response:.3f} -> total={b.total:.3f}")
        for m in b.matches:
            print(f"  match: pred[{m.pred_index}] <-> gt[{m.gt_index}] "
                  f"similarity={m.similarity:.3f}")
        for v in b.violations:
            print(f"  violation rule {v.rule_id}: {v.detail}")
    print("=" * 72)


if __name__ == "__main__":
    main()
