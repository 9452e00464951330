from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass

BACKGROUND_RGB = (255, 255, 255)


@dataclass(frozen=True)
class Category:
    """A color + shape pair; the shape word is the grounded noun."""

    color: str
    shape: str
    rgb: tuple[int, int, int]

    @property
    def name(self) -> str:
        return f"{self.color} {self.shape}"

    @property
    def noun(self) -> str:
        return self.shape


DEFAULT_CATEGORIES: tuple[Category, ...] = (
    Category("red", "circle", (220, 40, 40)),
    Category("blue", "square", (40, 80, 220)),
    Category("green", "triangle", (40, 170, 60)),
    Category("yellow", "ring", (230, 210, 40)),
    Category("purple", "cross", (140, 60, 180)),
    Category("orange", "bar", (240, 140, 30)),
    Category("cyan", "diamond", (40, 200, 210)),
    Category("magenta", "star", (220, 50, 180)),
    Category("brown", "pentagon", (130, 80, 40)),
    Category("gray", "crescent", (128, 128, 128)),
)


class CategoryRegistry:
    """Ordered, name-addressable set of categories."""

    def __init__(self, categories: Iterable[Category]) -> None:
        self._categories = tuple(categories)
        if not self._categories:
            raise ValueError("category registry must not be empty")
        names = [c.name for c in self._categories]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate category names: {names}")
        colors = [c.rgb for c in self._categories]
        if len(set(colors)) != len(colors):
            raise ValueError("registry colors must be distinct")
        self._by_name = {c.name: c for c in self._categories}

    def __iter__(self) -> Iterator[Category]:
        return iter(self._categories)

    def __len__(self) -> int:
        return len(self._categories)

    def __contains__(self, name: object) -> bool:
        return name in self._by_name

    @property
    def names(self) -> list[str]:
        return [c.name for c in self._categories]

    @property
    def words(self) -> list[str]:
        """Every color and shape word, for the text encoder vocabulary."""
        return sorted({w for c in self._categories for w in (c.color, c.shape)})

    def get(self, name: str) -> Category:
        try:
            return self._by_name[name]
        except KeyError as e:
            raise ValueError(f"Unknown category: {name}") from e

    def subset(self, names: Iterable[str]) -> CategoryRegistry:
        return CategoryRegistry(self.get(name) for name in names)


DEFAULT_REGISTRY = CategoryRegistry(DEFAULT_CATEGORIES)


def get_registry(names: list[str] | None = None) -> CategoryRegistry:
    if names is None:
        return DEFAULT_REGISTRY
    return DEFAULT_REGISTRY.subset(names)
