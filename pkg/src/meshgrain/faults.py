"""Deliberately broken programs for checking that the machine model is enforced."""

import numpy as np

from .engine import GridProgram, MeshConfig, build_mesh, run_program


class HoardingProgram(GridProgram):
    """Every processor stores one more word each step until the budget gives out."""

    n_steps = 64

    def init(self, coords, regs):
        return []

    def step(self, t, coords, regs, inbox):
        r, _ = np.broadcast_arrays(*coords)
        regs[f"H{t}"] = (np.full(r.shape, t), r >= 0)
        return []


class DoubleSendProgram(GridProgram):
    """Processor ``at`` sends two words east in the same step."""

    n_steps = 4

    def __init__(self, at=(1, 1), when=2):
        self.at = tuple(at)
        self.when = when

    def init(self, coords, regs):
        return []

    def step(self, t, coords, regs, inbox):
        r, c = np.broadcast_arrays(*coords)
        here = (r == self.at[0]) & (c == self.at[1]) & (t == self.when)
        return [(1, 1, 7, here), (1, 1, 8, here)]


FAULTS = {"budget": HoardingProgram, "double-send": DoubleSendProgram}


def run_fault(kind, edge=4, word_budget=8):
    """Run one broken program; it always ends in a ConstraintViolation."""
    mesh = build_mesh(MeshConfig(2, edge, word_budget))
    return run_program(mesh, FAULTS[kind](), label=kind)
