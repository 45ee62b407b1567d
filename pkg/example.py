"""Example usage of the modcsp library."""

from modcsp import CspInstance, ParityContext, count_solutions, p_reduce, parity_count
from modcsp.fixtures import z2_affine, z2_affine_maltsev
from modcsp.gadget import scan_relations
from modcsp.properties import analyze_structure
from modcsp.refine import solve_tp, tp_structure


def main():
    """Demonstrate modcsp library usage."""
    print("=== Parity over Z_2 ===\n")

    structure = z2_affine()
    instance = CspInstance(
        {v: "H" for v in "wxyz"},
        ((("w", "x", "y"), "lin0"), (("x", "y", "z"), "lin1"), (("z",), "C_1")),
    )
    ctx = ParityContext(structure, z2_affine_maltsev(structure))
    print(f"Solutions: {count_solutions(instance, structure).exact}")
    print(f"Parity: {parity_count(ctx, instance)}")

    print("\n=== T_3 ===\n")

    t3 = tp_structure(3)
    path = CspInstance(
        {"x": "T", "y": "T", "z": "T"}, ((("x", "y"), "R"), (("y", "z"), "R"), (("z",), "C_3"))
    )
    print(f"Solutions mod 3: {solve_tp(path, t3, 3)}")
    reduced, trace = p_reduce(t3, 3)
    print(f"Reduct after {len(trace.steps)} steps: {reduced.universe_size} elements")

    print("\n=== Analysis ===\n")

    report = analyze_structure(structure, 2)
    print(f"Mal'tsev polymorphism: {report['maltsev']}")
    for entry in scan_relations(structure, 2):
        print(f"{entry['relation']}: {len(entry['obstructions'])} obstructions")


if __name__ == "__main__":
    main()
