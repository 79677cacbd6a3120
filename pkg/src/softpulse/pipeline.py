"""Glue: target -> Givens factors -> Cartan parameters -> word -> schedules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frame import LabSchedule, SystemParams, to_lab_schedule
from .matcore import frob_dist
from .pulsec import FactorWord, RotSchedule, compile_word, word_from_cartan
from .su4cartan import CartanParams, cartan_params, reconstruct_cartan
from .su4givens import GivensFactor, givens_decompose, materialize


@dataclass
class Decomposition:
    target: np.ndarray
    factors: list[GivensFactor]
    params: list[CartanParams]
    word: FactorWord
    factor_residuals: list[float]
    word_residual: float


@dataclass
class Compilation:
    decomposition: Decomposition
    rot: RotSchedule
    lab: LabSchedule


def decompose(target: np.ndarray) -> Decomposition:
    factors = givens_decompose(target)
    params = [cartan_params(f) for f in factors]
    residuals = [frob_dist(reconstruct_cartan(p), materialize(f)) for p, f in zip(params, factors)]
    word = word_from_cartan(params)
    return Decomposition(target, factors, params, word, residuals, frob_dist(word.product(), target))


def compile_target(target: np.ndarray, system: SystemParams) -> Compilation:
    dec = decompose(target)
    rot = compile_word(dec.word, system.c_bound, system.d_bound)
    return Compilation(dec, rot, to_lab_schedule(rot, system))
