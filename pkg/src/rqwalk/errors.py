"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ContractError(RuntimeError):
    """A runtime contract was violated (non-unitary coin, superposed spin, norm drift).

    ``step``, ``condition`` and ``realization`` locate the failure inside a
    trajectory or an ensemble when known.
    """

    def __init__(self, reason: str, *, step: int | None = None,
                 condition: int | None = None, realization: int | None = None):
        self.reason = reason
        self.step = step
        self.condition = condition
        self.realization = realization
        super().__init__(self._render())

    def _render(self) -> str:
        where = [f"{name}={value}" for name, value in
                 (("condition", self.condition), ("realization", self.realization), ("step", self.step))
                 if value is not None]
        return f"{self.reason} ({', '.join(where)})" if where else self.reason

    def located(self, **where) -> "ContractError":
        """Return a copy with extra location fields filled in."""
        fields = {"step": self.step, "condition": self.condition, "realization": self.realization}
        fields.update({k: v for k, v in where.items() if v is not None})
        return ContractError(self.reason, **fields)
