from .handles import (
    HttpProver,
    LocalProver,
    MissingItemError,
    ProverError,
    ProverHandle,
    RecordingProver,
    TransportError,
)
from .noninteractive import BundleProver, NiProof, ni_prove, ni_verify
from .sampling import (
    FRACTION_BITS,
    fiat_shamir_uniform,
    sample_fraction,
    sample_fractions,
    sample_work,
    work_cdf,
)
from .session import (
    Draw,
    Rejection,
    Verdict,
    VerificationSession,
    VerifierOptions,
    VerifyResult,
    check_prover,
    flyclient_verify,
)
from .transcript import CSV_FIELDS, Transcript, TranscriptItem

__all__ = [
    "HttpProver",
    "LocalProver",
    "MissingItemError",
    "ProverError",
    "ProverHandle",
    "RecordingProver",
    "TransportError",
    "BundleProver",
    "NiProof",
    "ni_prove",
    "ni_verify",
    "FRACTION_BITS",
    "fiat_shamir_uniform",
    "sample_fraction",
    "sample_fractions",
    "sample_work",
    "work_cdf",
    "Draw",
    "Rejection",
    "Verdict",
    "VerificationSession",
    "VerifierOptions",
    "VerifyResult",
    "check_prover",
    "flyclient_verify",
    "CSV_FIELDS",
    "Transcript",
    "TranscriptItem",
]
