#!/usr/bin/env python3
"""Writes the hand-built fixture maps in this directory.

    python3 fixtures/generate.py

grid4x4.json is produced by `ugi synth --size 4 --out fixtures/grid4x4.json`.
"""

import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))


def rect(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def road(rid, a, b, lanes=2, limit=13.0):
    return {
        "id": rid,
        "geometry": [a, b],
        "lane_count": lanes,
        "speed_limit": limit,
        "walkable": True,
        "drivable": True,
    }


def junction(jid, incoming, outgoing):
    movements = [
        {"from_road": i, "to_road": o, "turn_type": "straight"}
        for i in incoming
        for o in outgoing
        if (i, o) not in UTURNS
    ]
    return {"id": jid, "road_ids": sorted(incoming + outgoing), "movements": movements}


# one-way pairs running in opposite directions
UTURNS = {(10, 11), (11, 10), (12, 13), (13, 12), (20, 21), (21, 20), (22, 23), (23, 22)}


def sample_fixture():
    j1, j2, j3, j4 = [-50.0, 0.0], [450.0, 0.0], [450.0, 500.0], [-50.0, 500.0]
    roads = [
        road(10, j1, j2),
        road(11, j2, j1),
        road(12, j2, j3),
        road(13, j3, j2),
        road(20, j3, j4),
        road(21, j4, j3),
        road(22, j4, j1),
        road(23, j1, j4),
    ]
    junctions = [
        junction(1, [11, 22], [10, 23]),
        junction(2, [10, 13], [11, 12]),
        junction(3, [12, 21], [13, 20]),
        junction(4, [20, 23], [21, 22]),
    ]
    categories = [
        "food.restaurant.noodles",
        "food.cafe.coffee",
        "shopping.store.grocery",
        "shopping.mall.department",
        "leisure.cinema.multiplex",
    ]
    pois = []
    for k in range(51):
        col, row = k % 6, k // 6
        pois.append(
            {
                "id": 700000000 + k,
                "coordinate": [10.0 + 15.0 * col, 30.0 + 25.0 * row],
                "name": f"shop {k}",
                "category": categories[k % len(categories)],
                "aoi_id": 500000000,
            }
        )
    aois = [
        {
            "id": 500000000,
            # 100 m x 260.59 m
            "boundary": rect(0.0, 20.0, 100.0, 280.59),
            "land_use": "commercial",
            "population": 1219,
            "connections": [
                {"road_id": 10, "point": [50.0, 0.0], "walk_allowed": True, "drive_allowed": True},
                {"road_id": 11, "point": [50.0, 0.0], "walk_allowed": True, "drive_allowed": True},
                {"road_id": 23, "point": [-50.0, 150.0], "walk_allowed": True, "drive_allowed": True},
            ],
            "enterprises": [
                {
                    "name": "Central Market",
                    "category": "retail",
                    "registered_capital": 50000000,
                    "employee_count": 120,
                    "average_wage": 600000,
                }
            ],
            "consumption": {"food": 2500, "shopping": 6000, "leisure": 4000},
        },
        {
            "id": 500000001,
            "boundary": rect(300.0, 20.0, 400.0, 120.0),
            "land_use": "industrial",
            "population": 0,
        },
        {
            "id": 500000002,
            "boundary": rect(150.0, 380.0, 250.0, 480.0),
            "land_use": "residential",
            "population": 800,
        },
        {
            "id": 500000010,
            "boundary": rect(300.0, 380.0, 400.0, 480.0),
            "land_use": "public_service",
            "population": 0,
        },
    ]
    persons = [{"id": 1000, "home": 500000002, "balance": 100000}]
    return {
        "metadata": {"name": "sample city", "district": "Haidian"},
        "roads": roads,
        "junctions": junctions,
        "aois": aois,
        "pois": pois,
        "persons": persons,
    }


def kg_fixture():
    """20 AOIs in four rows of five. Rows 0 and 2 are contiguous blocks, rows 1
    and 3 leave 20 m gaps between neighbours; rows 0/1 touch, the others do not."""
    row_y = [0.0, 150.0, 330.0, 480.0]
    cates = [
        ("food.restaurant.noodles", "Noodle House"),
        ("food.restaurant.hotpot", "Red Pot"),
        ("food.cafe.coffee", "Bean There"),
        ("shopping.store.grocery", "FreshMart"),
        ("leisure.park.garden", None),
    ]
    aois, pois = [], []
    for r in range(4):
        gap = 20.0 if r % 2 else 0.0
        for c in range(5):
            k = r * 5 + c
            x0 = c * (150.0 + gap)
            y0 = row_y[r]
            aid = 600000000 + k
            aoi = {
                "id": aid,
                "boundary": rect(x0, y0, x0 + 150.0, y0 + 150.0),
                "land_use": ["residential", "commercial", "industrial", "public_service"][k % 4],
                "population": 0,
                "connections": [],
            }
            if k % 7 == 3:
                aoi["district"] = "Chaoyang"
            aois.append(aoi)
            for p in range(2):
                cat, brand = cates[(k + 2 * p) % len(cates)]
                poi = {
                    "id": aid * 10 + p,
                    "coordinate": [x0 + 40.0 + 70.0 * p, y0 + 75.0],
                    "name": f"poi {k}.{p}",
                    "category": cat,
                }
                if brand:
                    poi["brand"] = brand
                pois.append(poi)
    return {
        "metadata": {"name": "kg fixture", "district": "Haidian"},
        "aois": aois,
        "pois": pois,
    }


def dangling_fixture():
    m = sample_fixture()
    m["metadata"]["name"] = "dangling reference"
    m["junctions"][0]["road_ids"].append(999)
    return m


def write(name, doc):
    with open(os.path.join(HERE, name), "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    write("sample_city.json", sample_fixture())
    write("kg20.json", kg_fixture())
    write("dangling_ref.json", dangling_fixture())
