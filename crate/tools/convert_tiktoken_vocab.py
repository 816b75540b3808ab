#!/usr/bin/env python3
"""Convert a tiktoken BPE rank file into the engine's vocabulary JSON.

Byte-level tokens are decoded to characters with UTF-8 (invalid byte
sequences become U+FFFD, which no regex in the corpus accepts). Special
tokens are appended after the BPE ranks and listed under "special" so the
token automaton excludes them.

    python3 tools/convert_tiktoken_vocab.py qwen.tiktoken data/qwen2_vocab.json

The Qwen2 rank file ships inside the `dashscope` wheel on PyPI
(dashscope/resources/qwen.tiktoken).
"""

import base64
import json
import sys

# Qwen2.5 added tokens followed by two extra ids used by diffusion checkpoints
# built on this tokenizer.
SPECIAL = [
    "<|endoftext|>", "<|im_start|>", "<|im_end|>", "<|object_ref_start|>",
    "<|object_ref_end|>", "<|box_start|>", "<|box_end|>", "<|quad_start|>",
    "<|quad_end|>", "<|vision_start|>", "<|vision_end|>", "<|vision_pad|>",
    "<|image_pad|>", "<|video_pad|>", "<tool_call>", "</tool_call>",
    "<|fim_prefix|>", "<|fim_middle|>", "<|fim_suffix|>", "<|fim_pad|>",
    "<|repo_name|>", "<|file_sep|>", "<|beginoftext|>",
]
MASK = "<|mask|>"


def main(src, dst):
    ranked = []
    with open(src, "rb") as f:
        for line in f:
            if not line.strip():
                continue
            tok, rank = line.split()
            ranked.append((int(rank), base64.b64decode(tok)))
    ranked.sort()
    assert [r for r, _ in ranked] == list(range(len(ranked)))
    tokens = [b.decode("utf-8", errors="replace") for _, b in ranked]
    tokens += SPECIAL + [MASK]
    with open(dst, "w", encoding="utf-8") as f:
        json.dump({"tokens": tokens, "mask": MASK, "special": SPECIAL}, f,
                  ensure_ascii=False, separators=(",", ":"))
    print(f"{len(tokens)} tokens written to {dst}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
