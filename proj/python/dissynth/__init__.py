"""Distributed dissipativity-based controller synthesis for networked linear systems."""

from ._core import (
    Certificate,
    GenerationBudgetExceeded,
    IoError,
    NumericalError,
    Problem,
    Subsystem,
    SynthesisResult,
    VerificationReport,
    centralized,
    example1,
    generate_example2,
    hinf_norm,
    recover_gains,
    simulate,
    smat,
    spectral_abscissa,
    svec,
    synthesize,
    verify,
)

__all__ = [
    "Certificate",
    "GenerationBudgetExceeded",
    "IoError",
    "NumericalError",
    "Problem",
    "Subsystem",
    "SynthesisResult",
    "VerificationReport",
    "centralized",
    "example1",
    "generate_example2",
    "hinf_norm",
    "recover_gains",
    "simulate",
    "smat",
    "spectral_abscissa",
    "svec",
    "synthesize",
    "verify",
]
