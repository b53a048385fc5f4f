"""viplab: goal-conditioned value embeddings as dense reward and
representation, a desk-scale laboratory.

Train an MLP encoder on action-free trajectory data with the value-implicit
objective (or the TCN / squared-TD baselines), then reuse the frozen
embedding as reward and representation for MPPI trajectory optimization,
reward-weighted regression, and the smoothness analysis battery.
"""

__version__ = "0.1.0"

from . import analysis, control, encoder, gradcore, objectives, trajstore, worlds  # noqa: F401
