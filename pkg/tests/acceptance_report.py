"""Shared registry of acceptance outcomes, printed at the end of the pytest run."""

TITLES = {
    1: "published benchmark numbers out of reach at desk scale (stated)",
    2: "gradient suite vs central differences",
    3: "composition identity with fresh residual branches",
    4: "residual-label algebra",
    5: "freeze contract across stage-1 training",
    6: "stage-1 gain over master on toy data",
    7: "up variant >= down variant on toy data",
    8: "L1 vs L2 residual-loss ablation rows",
    9: "PSNR/SSIM vs brute-force oracles",
    10: "checkpoint round trip and corruption rejection",
}

RESULTS = {}


def line(n: int) -> str:
    if n not in RESULTS:
        return f"criterion {n:>2}: NOT RUN  {TITLES[n]}"
    ok, detail = RESULTS[n]
    return f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}     {TITLES[n]} ({detail})"


def report(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (bool(ok), detail)
    print(line(n))
    assert ok, line(n)
