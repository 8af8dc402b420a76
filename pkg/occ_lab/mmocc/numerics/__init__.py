from .functional import (
	LayerContext, Mode, check_mode,
	conv2d_forward, conv2d_backward,
	batchnorm2d_forward, batchnorm2d_backward,
	maxpool2d_forward, maxpool2d_backward,
	dropout_forward, dropout_backward,
	activation_forward, activation_backward,
	upsample2x_forward, upsample2x_backward,
)
from .layers import BaseLayer, Conv2d, BatchNorm2d, MaxPool2d, Dropout, Activation, Upsample2x, LayerStack
from .gradcheck import grad_check, layer_fn_for, numeric_gradient, relative_error, check_layers
