#!/usr/bin/env python3
"""Generate the bundled mini corpus: short synthetic snippets in five languages.

Usage: python3 scripts/make_mini_corpus.py [--per-language N] [--seed S] [--output PATH]

Snippets are assembled from small statement templates with identifiers and
literals drawn from pools shared by every language, so the label is carried by
syntax rather than by vocabulary. A few short C and C++ loop bodies are
written identically on purpose, as in real Q&A data.
"""

import argparse
import json
import random

NAMES = [
    "count", "total", "items", "value", "result", "data", "buffer", "index", "node", "user",
    "name", "size", "list", "key", "entry", "line", "text", "path", "config", "score",
    "left", "right", "width", "height", "offset", "limit", "cache", "queue", "stack", "temp",
]
FUNCS = [
    "process", "update", "compute", "parse", "load", "save", "render", "handle", "build", "check",
    "merge", "split", "reset", "append", "resolve", "find", "sort", "filter", "apply", "read",
]
TYPES = ["Item", "Node", "User", "Config", "Buffer", "Entry", "Parser", "Record", "Point", "Matrix"]
WORDS = ["hello", "error", "done", "value is", "not found", "ok", "failed", "result", "start", "end"]


class Gen:
    def __init__(self, rng):
        self.r = rng

    def name(self):
        return self.r.choice(NAMES)

    def func(self):
        return self.r.choice(FUNCS)

    def type(self):
        return self.r.choice(TYPES)

    def num(self):
        return str(self.r.choice([0, 1, 2, 3, 5, 8, 10, 16, 42, 100, 255, 1024]))

    def word(self):
        return self.r.choice(WORDS)

    def pick(self, options):
        return self.r.choice(options)()

    def body(self, stmt, lo=1, hi=4):
        return [stmt() for _ in range(self.r.randint(lo, hi))]


def indent(lines, n):
    return [" " * n + l for l in lines]


def python(g):
    def stmt():
        return g.pick([
            lambda: f"{g.name()} = {g.func()}({g.name()})",
            lambda: f"{g.name()} += {g.num()}",
            lambda: f"print(\"{g.word()}\", {g.name()})",
            lambda: f"{g.name()}.append({g.name()})",
            lambda: f"{g.name()} = [x * {g.num()} for x in {g.name()}]",
            lambda: f"{g.name()} = {{'{g.name()}': {g.num()}}}",
            lambda: f"{g.name()} = len({g.name()}) - {g.num()}",
            lambda: f"return self.{g.name()}",
        ])

    return g.pick([
        lambda: "\n".join([f"def {g.func()}_{g.name()}({g.name()}, {g.name()}=None):"] + indent(g.body(stmt), 4)),
        lambda: "\n".join([f"for {g.name()} in range({g.num()}):"] + indent(g.body(stmt), 4)),
        lambda: "\n".join([f"class {g.type()}(object):", f"    def __init__(self, {g.name()}):",
                           f"        self.{g.name()} = {g.name()}"] + indent(g.body(stmt, 0, 2), 8)),
        lambda: "\n".join([f"if {g.name()} is not None and {g.name()} > {g.num()}:"] + indent(g.body(stmt), 4)
                          + ["else:", f"    {g.name()} = None"]),
        lambda: "\n".join([f"import {g.pick([lambda: 'os', lambda: 'sys', lambda: 'json', lambda: 're'])}",
                           f"with open('{g.name()}.txt') as f:"] + indent(g.body(stmt), 4)),
        lambda: "\n".join(g.body(stmt, 2, 5)),
    ])


def java(g):
    def stmt():
        return g.pick([
            lambda: f"int {g.name()} = {g.func()}({g.name()});",
            lambda: f"{g.name()} += {g.num()};",
            lambda: f"System.out.println(\"{g.word()}\" + {g.name()});",
            lambda: f"List<{g.type()}> {g.name()} = new ArrayList<>();",
            lambda: f"String {g.name()} = {g.name()}.toString();",
            lambda: f"{g.name()}.add(new {g.type()}({g.num()}));",
            lambda: f"this.{g.name()} = {g.name()};",
            lambda: f"return {g.name()};",
        ])

    return g.pick([
        lambda: "\n".join([f"public {g.pick([lambda: 'static ', lambda: ''])}void {g.func()}({g.type()} {g.name()}) {{"]
                          + indent(g.body(stmt), 4) + ["}"]),
        lambda: "\n".join([f"public class {g.type()} {{", f"    private int {g.name()};",
                           f"    public {g.type()}(int {g.name()}) {{"] + indent(g.body(stmt), 8) + ["    }", "}"]),
        lambda: "\n".join([f"for (int i = 0; i < {g.name()}.size(); i++) {{"] + indent(g.body(stmt), 4) + ["}"]),
        lambda: "\n".join([f"try {{"] + indent(g.body(stmt), 4)
                          + [f"}} catch (IOException e) {{", "    e.printStackTrace();", "}"]),
        lambda: "\n".join([f"@Override", f"public String toString() {{"] + indent(g.body(stmt, 0, 2), 4)
                          + [f"    return \"{g.type()}\" + {g.name()};", "}"]),
        lambda: "\n".join(g.body(stmt, 2, 5)),
    ])


def c(g):
    def stmt():
        return g.pick([
            lambda: f"int {g.name()} = {g.func()}({g.name()});",
            lambda: f"{g.name()} += {g.num()};",
            lambda: f"printf(\"{g.word()} %d\\n\", {g.name()});",
            lambda: f"char *{g.name()} = malloc({g.num()} * sizeof(char));",
            lambda: f"free({g.name()});",
            lambda: f"memset({g.name()}, 0, sizeof({g.name()}));",
            lambda: f"{g.name()}->{g.name()} = {g.num()};",
            lambda: f"return {g.name()};",
        ])

    return g.pick([
        lambda: "\n".join([f"int {g.func()}(int {g.name()}, char *{g.name()})", "{"] + indent(g.body(stmt), 4) + ["}"]),
        lambda: "\n".join(["#include <stdio.h>", "#include <stdlib.h>", "", "int main(void)", "{"]
                          + indent(g.body(stmt), 4) + ["    return 0;", "}"]),
        lambda: "\n".join([f"struct {g.name()} {{", f"    int {g.name()};", f"    char *{g.name()};",
                           f"    struct {g.name()} *next;", "};"]),
        lambda: "\n".join([f"typedef struct {{", f"    int {g.name()};", f"    double {g.name()};",
                           f"}} {g.type().lower()}_t;"]),
        lambda: "\n".join([f"for (i = 0; i < {g.num()}; i++) {{"] + indent(g.body(stmt), 4) + ["}"]),
        lambda: "\n".join(g.body(stmt, 2, 5)),
        # written identically in C++
        lambda: f"for (int i = 0; i < {g.name()}; i++) {{\n    {g.name()} += {g.name()}[i];\n}}",
    ])


def cpp(g):
    def stmt():
        return g.pick([
            lambda: f"auto {g.name()} = {g.func()}({g.name()});",
            lambda: f"{g.name()} += {g.num()};",
            lambda: f"std::cout << \"{g.word()} \" << {g.name()} << std::endl;",
            lambda: f"std::vector<int> {g.name()}({g.num()});",
            lambda: f"{g.name()}.push_back({g.name()});",
            lambda: f"std::string {g.name()} = \"{g.word()}\";",
            lambda: f"{g.type()} *{g.name()} = new {g.type()}();",
            lambda: f"return {g.name()};",
        ])

    return g.pick([
        lambda: "\n".join([f"void {g.type()}::{g.func()}(const std::string& {g.name()}) {{"]
                          + indent(g.body(stmt), 4) + ["}"]),
        lambda: "\n".join(["#include <iostream>", "#include <vector>", "", "int main() {"]
                          + indent(g.body(stmt), 4) + ["    return 0;", "}"]),
        lambda: "\n".join([f"class {g.type()} {{", "public:", f"    {g.type()}(int {g.name()}) : {g.name()}_({g.name()}) {{}}",
                           f"    int {g.func()}() const;", "private:", f"    int {g.name()}_;", "};"]),
        lambda: "\n".join([f"template <typename T>", f"T {g.func()}(const T& {g.name()}) {{"]
                          + indent(g.body(stmt), 4) + ["}"]),
        lambda: "\n".join([f"for (auto& {g.name()} : {g.name()}) {{"] + indent(g.body(stmt), 4) + ["}"]),
        lambda: "\n".join(g.body(stmt, 2, 5)),
        lambda: f"for (int i = 0; i < {g.name()}; i++) {{\n    {g.name()} += {g.name()}[i];\n}}",
    ])


def javascript(g):
    def stmt():
        return g.pick([
            lambda: f"const {g.name()} = {g.func()}({g.name()});",
            lambda: f"let {g.name()} = {g.num()};",
            lambda: f"console.log('{g.word()}', {g.name()});",
            lambda: f"{g.name()}.push({g.name()});",
            lambda: f"const {g.name()} = {g.name()}.map(x => x * {g.num()});",
            lambda: f"{g.name()} = {{ {g.name()}: {g.num()}, {g.name()}: '{g.word()}' }};",
            lambda: f"this.{g.name()} = {g.name()};",
            lambda: f"return {g.name()};",
        ])

    return g.pick([
        lambda: "\n".join([f"function {g.func()}({g.name()}, {g.name()}) {{"] + indent(g.body(stmt), 2) + ["}"]),
        lambda: "\n".join([f"const {g.func()} = async ({g.name()}) => {{"] + indent(g.body(stmt), 2) + ["};"]),
        lambda: "\n".join([f"$('#{g.name()}').on('click', function () {{"] + indent(g.body(stmt), 2) + ["});"]),
        lambda: "\n".join([f"fetch('/api/{g.name()}')", "  .then(res => res.json())",
                           f"  .then({g.name()} => {{"] + indent(g.body(stmt), 4) + ["  });"]),
        lambda: "\n".join([f"class {g.type()} {{", f"  constructor({g.name()}) {{"] + indent(g.body(stmt), 4)
                          + ["  }", "}"]),
        lambda: "\n".join(g.body(stmt, 2, 5)),
    ])


LANGUAGES = {"C": c, "C++": cpp, "Java": java, "JavaScript": javascript, "Python": python}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--per-language", type=int, default=400)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--output", default="data/mini_corpus.jsonl")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    g = Gen(rng)
    rows = []
    for label, make in LANGUAGES.items():
        seen = set()
        while len(seen) < args.per_language:
            text = make(g)
            if len(text) >= 10 and text not in seen:
                seen.add(text)
                rows.append({"text": text, "label": label})
    rng.shuffle(rows)
    with open(args.output, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
