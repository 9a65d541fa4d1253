from .attention import AxisAttention, TFSelfAttention, flatten_axis, sa_axis, tf_sa, unflatten_axis

__all__ = ['AxisAttention', 'TFSelfAttention', 'flatten_axis', 'sa_axis', 'tf_sa', 'unflatten_axis']
