from .architecture import ArchConfig, ModelParams, BranchMode, BRANCH_MODES, branches, build_encoder, build_decoder
from .network import (
	LossBreakdown, encode, reconstruct, embed, flatten, unflatten, compute_loss, check_loss_gradients,
)
from .regularizer import wld_penalty, wld_penalty_with_grad, REGULARIZERS
