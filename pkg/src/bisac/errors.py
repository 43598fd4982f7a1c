"""Exception types raised across the toolkit."""


class BisacError(Exception):
    """Base class for toolkit errors."""


class InvalidArgument(BisacError, ValueError):
    pass


class IllConditionedPilots(BisacError):
    def __init__(self, cond, subcarrier=None):
        self.cond = float(cond)
        self.subcarrier = subcarrier
        super().__init__(
            f"pilot Gram matrix is ill-conditioned (cond={self.cond:.3e}, subcarrier={subcarrier})"
        )


class InvalidPencilConfig(BisacError, ValueError):
    pass


class RankDeficient(BisacError):
    """Fewer than q resolvable components in the pencil data."""


class DegenerateAoD(BisacError):
    pass


class ZeroEnergyTarget(BisacError):
    pass


class UnidentifiableScenario(BisacError):
    pass


class GridTooLarge(BisacError):
    def __init__(self, size, budget):
        self.size = size
        self.budget = budget
        super().__init__(f"grid has {size} points, budget is {budget}")


class UnsupportedShape(BisacError, ValueError):
    pass


class Divergence(BisacError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"loss became non-finite at epoch {epoch}")
