from .diagnostics import ParameterSummary, effective_sample_size, split_rhat, summarize
from .gibbs import (
    AugmentationState,
    ChainState,
    GibbsSampler,
    McmcConfig,
    PairedStates,
    PosteriorSamples,
    Priors,
    run_chain,
    run_chains,
    scalar_eta_chain,
)
from .slice import slice_sample


def diagnostics(samples: PosteriorSamples, level: float = 0.95) -> list[ParameterSummary]:
    """Per-parameter summary table over all chains of ``samples``."""
    return [summarize(name, samples.by_chain(col), level)
            for name, col in samples.scalar_columns().items()]


__all__ = [
    "AugmentationState", "ChainState", "GibbsSampler", "McmcConfig", "PairedStates",
    "ParameterSummary", "PosteriorSamples", "Priors", "diagnostics", "effective_sample_size",
    "run_chain", "run_chains", "scalar_eta_chain", "slice_sample", "split_rhat", "summarize",
]
