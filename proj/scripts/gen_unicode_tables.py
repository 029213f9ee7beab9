#!/usr/bin/env python3
"""Regenerates src/unicode_tables.cpp from Python's unicodedata."""
import sys
import unicodedata

ASCII_SYMBOLS = set("$+<=>^`|~")


def ranges(pred):
    out = []
    start = None
    for cp in range(0x110000):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def is_punct(cp):
    ch = chr(cp)
    return unicodedata.category(ch).startswith("P") or ch in ASCII_SYMBOLS


def is_space(cp):
    return chr(cp).isspace()


def lower_pairs():
    pairs = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        low = chr(cp).lower()
        if len(low) == 1 and ord(low) != cp:
            pairs.append((cp, ord(low)))
    return pairs


def emit_ranges(name, rs):
    lines = [f"const CodepointRange {name}[] = {{"]
    for a, b in rs:
        lines.append(f"    {{0x{a:X}, 0x{b:X}}},")
    lines.append("};")
    return "\n".join(lines)


def main():
    pairs = lower_pairs()
    body = [
        f"// Generated by scripts/gen_unicode_tables.py (Unicode {unicodedata.unidata_version}). Do not edit.",
        "",
        '#include "unicode_tables.hpp"',
        "",
        "namespace sameside::unicode {",
        "",
        emit_ranges("kPunctuation", ranges(is_punct)),
        "",
        emit_ranges("kWhitespace", ranges(is_space)),
        "",
        "const CaseMapping kLowercase[] = {",
    ]
    body += [f"    {{0x{a:X}, 0x{b:X}}}," for a, b in pairs]
    body += [
        "};",
        "",
        "std::span<const CodepointRange> punctuation_ranges() { return kPunctuation; }",
        "std::span<const CodepointRange> whitespace_ranges() { return kWhitespace; }",
        "std::span<const CaseMapping> lowercase_mappings() { return kLowercase; }",
        "",
        "}  // namespace sameside::unicode",
        "",
    ]
    sys.stdout.write("\n".join(body))


if __name__ == "__main__":
    main()
