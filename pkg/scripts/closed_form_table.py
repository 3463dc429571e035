#!/usr/bin/env python3
"""Print the model-parameter table: solved quadrature values vs closed forms.

Covers the noisy-linear family (mu = gain, sigma^2 = eta^2 = noise variance)
and the random bit-flip family (mu = (2p-1) sqrt(2/pi),
sigma^2 = eta^2 = 1 - (2/pi)(1-2p)^2), plus a few pairs with no closed form.
"""

import argparse
import math

from siren.errors import NoRoot
from siren.losses import Glm, LogisticPaper, Square
from siren.model_params import closed_form_params, solve_mu
from siren.observations import FlipSign, LinearNoise, NoisySign, SignClean, UniformQuantizer


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.parse_args()

    pairs = []
    for lam in (0.5, 1.0, 1.7):
        for std in (0.0, 0.3, 1.0):
            pairs.append((Square(), LinearNoise(lam, std)))
    for p in (0.6, 0.75, 0.9, 1.0):
        pairs.append((Square(), FlipSign(p)))
    pairs += [
        (Square(), SignClean()),
        (Square(), NoisySign("logistic", 1.0)),
        (Square(), UniformQuantizer(0.5, 4.0)),
        (Glm("logcosh"), NoisySign("logistic", 1.0)),
        (LogisticPaper(), SignClean()),
        (LogisticPaper(), NoisySign("logistic", 1.0)),
    ]

    def describe(model):
        fields = {
            "linear": lambda m: f"gain={m.gain}, std={m.noise_std}",
            "flip_sign": lambda m: f"p={m.p}",
            "sign_clean": lambda m: "",
            "noisy_sign": lambda m: f"{m.noise}, scale={m.scale}",
            "quantizer": lambda m: f"step={m.step}, sat={m.sat}",
        }
        args = fields[model.kind](model)
        return f"{model.kind}({args})"

    header = f"{'loss':<14} {'model':<28} {'mu':>10} {'sigma^2':>10} {'eta^2':>10}  closed form"
    print(header)
    print("-" * len(header))
    for loss, model in pairs:
        desc = describe(model)
        try:
            solved = solve_mu(loss, model)
        except NoRoot as exc:
            print(f"{loss.kind:<14} {desc:<28} {'-- no root (incompatible pair)':>33}  "
                  f"bracket_exhausted={exc.bracket_exhausted}")
            continue
        cf = closed_form_params(loss, model)
        if cf is None:
            tail = "(none)"
        else:
            dev = max(abs(solved.mu - cf.mu), abs(solved.sigma_sq - cf.sigma_sq),
                      abs(solved.eta_sq - cf.eta_sq))
            tail = f"deviation {dev:.1e}"
        print(f"{loss.kind:<14} {desc:<28} {solved.mu:>10.6f} {solved.sigma_sq:>10.6f} "
              f"{solved.eta_sq:>10.6f}  {tail}")

    print()
    print(f"reference: sqrt(2/pi) = {math.sqrt(2 / math.pi):.6f}")


if __name__ == "__main__":
    main()
