from ..errors import ShapeError


def pair(v) -> tuple[int, int]:
    if isinstance(v, (tuple, list)):
        if len(v) != 2:
            raise ShapeError(f"expected a pair, got {v!r}")
        return int(v[0]), int(v[1])
    return int(v), int(v)


def conv_out_size(size: int, k: int, stride: int, pad: int, dilation: int) -> int:
    if stride < 1 or dilation < 1:
        raise ShapeError("stride and dilation must be >= 1")
    if pad < 0:
        raise ShapeError("padding must be >= 0")
    span = dilation * (k - 1) + 1
    out = (size + 2 * pad - span) // stride + 1
    if out < 1:
        raise ShapeError(f"kernel span {span} does not fit input {size} with padding {pad}")
    return out
