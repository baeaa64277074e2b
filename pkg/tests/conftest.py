import pytest

from scenecomp.catalog import ClassCatalog, default_catalog
from scenecomp.dataset import PlacementRule, SceneTemplate, generate_synthetic_scene, make_sample
from scenecomp.graphs import (
    BUILDING,
    GROUND_TRUTH,
    OBJECT,
    ROOM,
    SceneNode,
    build_graph,
)


@pytest.fixture
def catalog():
    return default_catalog()


@pytest.fixture
def small_catalog():
    return ClassCatalog(("table", "chair", "lamp", "plant", "sofa", "shelf", "bed", "desk"))


@pytest.fixture
def toy_template():
    return SceneTemplate(
        "toy",
        (
            PlacementRule("table", (1, 1), "center"),
            PlacementRule("chair", (1, 3), "table", 0.9),
            PlacementRule("sofa", (0, 1), "wall"),
            PlacementRule("lamp", (0, 1), "table", 0.5),
            PlacementRule("plant", (0, 2), "wall"),
            PlacementRule("bed", (0, 1), "wall"),
        ),
    )


def simple_graph(catalog, n_objects_per_room=(2, 1)):
    """1 building, len(n_objects_per_room) rooms with stored extents."""
    nodes = [SceneNode(0, BUILDING)]
    edges = []
    next_id = 1
    for r, n_obj in enumerate(n_objects_per_room):
        room_id = next_id
        next_id += 1
        nodes.append(
            SceneNode(room_id, ROOM, position=(r * 10.0 + 4, 4.0, 1.5), dimensions=(8.0, 8.0, 3.0))
        )
        edges.append((0, room_id))
        for k in range(n_obj):
            nodes.append(
                SceneNode(
                    next_id,
                    OBJECT,
                    class_index=k % catalog.n,
                    position=(r * 10.0 + 2 + k, 3.0, 0.5),
                    dimensions=(1.0, 1.0, 1.0),
                )
            )
            edges.append((room_id, next_id))
            next_id += 1
    return build_graph(nodes, edges, GROUND_TRUTH, catalog)


def toy_samples(small_catalog, toy_template, n=5, grid_size=16, n_rooms=3):
    return [
        make_sample(
            generate_synthetic_scene((toy_template,), n_rooms, seed, small_catalog),
            0.25,
            grid_size,
            seed,
        )
        for seed in range(n)
    ]
