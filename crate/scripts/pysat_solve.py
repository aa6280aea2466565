#!/usr/bin/env python3
"""Solve a DIMACS file with a PySAT back end and print SAT competition output.

Usage: pysat_solve.py [--solver glucose4] FILE
Exit status: 10 SAT, 20 UNSAT, 0 otherwise.
"""
import argparse
import sys

from pysat.formula import CNF
from pysat.solvers import Solver


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--solver", default="glucose4")
    parser.add_argument("file")
    args = parser.parse_args()

    cnf = CNF(from_file=args.file)
    with Solver(name=args.solver, bootstrap_with=cnf.clauses) as s:
        sat = s.solve()
        if sat:
            print("s SATISFIABLE")
            model = s.get_model() or []
            print("v " + " ".join(str(v) for v in model) + " 0")
            return 10
        print("s UNSATISFIABLE")
        return 20


if __name__ == "__main__":
    sys.exit(main())
