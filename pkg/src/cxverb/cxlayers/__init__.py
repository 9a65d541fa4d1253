from .module import Module, ModuleList, Parameter
from .functional import (conv_output_size, conv_transpose_output_size, cx_batchnorm, cx_conv2d,
                         cx_conv_transpose2d, cx_leaky_relu, embed_kernel)
from .layers import (CxBatchNorm2d, CxConv2d, CxConvTranspose2d, DecoderBlock, EncoderBlock, SkipConvBlock,
                     init_kernel, same_padding)
from .spectral import SNConv2d, SpectralNormState, embedded_matrix, power_iterate, spectral_normalize

__all__ = ['Module', 'ModuleList', 'Parameter', 'conv_output_size', 'conv_transpose_output_size', 'cx_batchnorm',
           'cx_conv2d', 'cx_conv_transpose2d', 'cx_leaky_relu', 'embed_kernel', 'CxBatchNorm2d', 'CxConv2d',
           'CxConvTranspose2d', 'DecoderBlock', 'EncoderBlock', 'SkipConvBlock', 'init_kernel', 'same_padding',
           'SNConv2d', 'SpectralNormState', 'embedded_matrix', 'power_iterate', 'spectral_normalize']
