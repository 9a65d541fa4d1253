from .tensor import CxTensor, stack
from .tape import Gradients, Tape, backward, current_tape, defvjp, emit, no_record, registered_ops, tape_forward
from .ops import (abs2, add, concat, conj, cx_elementwise, cx_magnitude, cx_matmul, dot_planes, fold_planes,
                  log, mean_all, mul, permute, plane_abs, reciprocal, reshape, scale, shift, sigmoid, softmax,
                  square_planes, sub, sum_all, tanh_planes)
from .gradcheck import GradCheckReport, grad_check, grad_check_module

__all__ = ['CxTensor', 'stack', 'Gradients', 'Tape', 'backward', 'current_tape', 'defvjp', 'emit', 'no_record',
           'registered_ops', 'tape_forward', 'abs2', 'add', 'concat', 'conj', 'cx_elementwise', 'cx_magnitude',
           'cx_matmul', 'dot_planes', 'fold_planes', 'mean_all', 'mul', 'permute', 'plane_abs', 'reciprocal', 'log',
           'reshape', 'scale', 'shift', 'sigmoid', 'softmax', 'square_planes', 'sub', 'sum_all', 'tanh_planes',
           'GradCheckReport', 'grad_check', 'grad_check_module']
