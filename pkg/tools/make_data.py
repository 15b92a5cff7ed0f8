"""Regenerate the bundled JSON documents in src/tempocorr/data."""

from __future__ import annotations

from pathlib import Path

from tempocorr import io, models
from tempocorr.automata import ClassicalMachine
from tempocorr.expressions import lgi3, lgi4, single_bit_witness

DATA = Path(__file__).resolve().parents[1] / "src" / "tempocorr" / "data"


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    docs = {
        "rotating_qubit.json": io.model_to_json(models.rotating_qubit(), "qubit rotated by pi/3 between sigma_z measurements"),
        "four_time_qubit.json": io.model_to_json(models.four_time_qubit(), "qubit rotated by pi/4 between sigma_z measurements"),
        "spin1_precession.json": io.model_to_json(models.spin1_precession(), "spin 1, rotation 2pi/5 about x, coarse-grained von Neumann J_z test"),
        "superposition_then_x.json": io.model_to_json(models.superposition_then_x(), "|+x>, optional sigma_z probe then sigma_x"),
        "noisy_repeat.json": io.model_to_json(models.noisy_repeat(0.2), "repeated sigma_z with depolarizing noise 0.2"),
        "geometric_half.json": io.machine_to_json(models.geometric_clock(0.5), "one state, ticks with probability 1/2"),
        "counter_4.json": io.machine_to_json(models.counter_clock(4), "deterministic four-state counter"),
        "flip.json": io.machine_to_json(models.flip_machine(), "two states emitting 0101..."),
        "one_tick_001.json": io.machine_to_json(
            ClassicalMachine([0.0, 1.0], [[[1 / 3, 0.0], [2 / 3, 0.0]], [[2 / 3, 1 / 3], [0.0, 0.0]]]),
            "two-state machine emitting 001 with probability 8/27"),
        "lgi3.json": io.expression_to_json(lgi3()),
        "lgi4.json": io.expression_to_json(lgi4()),
        "single_bit_witness.json": io.expression_to_json(single_bit_witness()),
        "mub_qubit_assemblage.json": io.assemblage_to_json(models.mub_qubit_assemblage()),
    }
    for name, doc in docs.items():
        (DATA / name).write_text(io.dumps(doc))
    print(f"wrote {len(docs)} files to {DATA}")


if __name__ == "__main__":
    main()
