#!/usr/bin/env python3
"""End-to-end checks of the condsym command line tool."""
import json
import os
import subprocess
import sys
import tempfile

import jsonschema

BIN = sys.argv[1]
ROOT = sys.argv[2]
DATA = os.path.join(ROOT, "data")
REF = os.path.join(DATA, "reference")
SCHEMA = json.load(open(os.path.join(ROOT, "docs", "report.schema.json")))

failures = []


def run(*args, env=None):
    e = dict(os.environ)
    e.pop("CONDSYM_SEED", None)
    if env:
        e.update(env)
    return subprocess.run([BIN, *args], capture_output=True, text=True, env=e)


def check(name, cond, detail=""):
    print(("ok   " if cond else "FAIL ") + name + ("" if cond else " - " + detail))
    if not cond:
        failures.append(name)


def expect_rc(name, rc, *args):
    p = run(*args)
    check(f"{name} exits {rc}", p.returncode == rc, f"got {p.returncode}: {p.stderr.strip()}")
    return p


def expect_valid(name, rc, *args):
    p = expect_rc(name, rc, *args, "--json")
    try:
        jsonschema.validate(json.loads(p.stdout), SCHEMA)
        check(f"{name} report valid", True)
    except (json.JSONDecodeError, jsonschema.ValidationError) as err:
        check(f"{name} report valid", False, str(err).splitlines()[0])
    return p


generic = os.path.join(DATA, "rd_generic.sys")

expect_rc("missing subcommand", 2)
with tempfile.NamedTemporaryFile("w", suffix=".sys", delete=False) as bad:
    bad.write("[variables]\nu, v\n[system]\nu_t = u_xx +* v\n")
expect_rc("syntax error", 2, "detsys", bad.name)
os.unlink(bad.name)
expect_rc("restriction violated", 3, "verify", "--catalog", "2", "--param", "lambda2=0")
expect_rc("unknown row", 3, "catalog", "show", "99")

expect_valid("verify row 2", 0, "verify", "--catalog", "2")
expect_valid("verify row 3 first type", 4, "verify", "--catalog", "3", "--first-type")
expect_rc("verify row 3 first type as expected", 0, "verify", "--catalog", "3", "--first-type", "--expect-classification")
expect_valid("verify row 1 first type", 0, "verify", "--catalog", "1", "--first-type")
p = expect_valid("verify file", 0, "verify", os.path.join(DATA, "catalog", "row1.sys"))
check("verify file keeps meta row", json.loads(p.stdout).get("row") == 1)
expect_rc("expect classification needs a row", 3, "verify", generic, "--expect-classification")
expect_valid("detsys", 0, "detsys", generic)
expect_valid("detsys compare", 0, "detsys", generic, "--type", "nonclassical",
             "--compare", os.path.join(REF, "nonclassical.sys"))
expect_valid("compare identical", 0, "compare", os.path.join(REF, "first_type.sys"), os.path.join(REF, "first_type.sys"))
expect_valid("compare different", 4, "compare", os.path.join(REF, "first_type.sys"), os.path.join(REF, "nonclassical.sys"))
expect_valid("example", 0, "example", generic, "--kind", "first")
expect_valid("kirchhoff", 0, "kirchhoff", "--catalog", "2")
expect_valid("catalog list", 0, "catalog", "list")
expect_valid("catalog show", 0, "catalog", "show", "1")

a = run("verify", "--catalog", "2", "--json", "--seed", "7")
b = run("verify", "--catalog", "2", "--json", "--seed", "7")
check("verify output deterministic", a.stdout == b.stdout and a.stdout != "")
c = run("verify", "--catalog", "2", "--json", "--seed", "8")
check("seed changes sampling", c.stdout != a.stdout)
d = run("verify", "--catalog", "2", "--json", env={"CONDSYM_SEED": "7"})
check("CONDSYM_SEED honoured", json.loads(d.stdout)["seed"] == 7 and d.stdout == a.stdout)

plain = run("detsys", generic, "--reduced", "--json")
star = run("detsys", generic, "--reduced", "--diff-consequences", "--json")
eqs = lambda p: json.loads(p.stdout)["system"]["equations"]
check("reduced system unchanged by differential consequences",
      plain.returncode == 0 and star.returncode == 0 and eqs(plain) == eqs(star))

print(f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
