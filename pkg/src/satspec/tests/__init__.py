# pylint: disable=missing-docstring

import csv

from os import path

from pytest import fixture

from ..config import Catalog, load_system
from ..params import DimensionlessPoint


class Fixtures:
    def fixture_path(self, *dir):
        return path.join(path.dirname(__file__), "fixtures", *dir)

    def fixture_content(self, *dir) -> bytes:
        return open(self.fixture_path(*dir), "rb").read()


class SystemFixtures(Fixtures):
    @fixture
    def catalog(self):
        return Catalog.builtin()

    @fixture
    def system(self, request, catalog):
        """A catalog system, selected by species name"""
        return catalog.system(request.param)

    @fixture
    def sr_like(self):
        """Sr clock transition with C = 100"""
        return load_system(config=self.fixture_path("config", "sr-like.yaml"))


class PointFixtures:
    @fixture
    def point(self, request):
        """A DimensionlessPoint from a (C, I_in[, delta[, theta]]) tuple"""
        return DimensionlessPoint(*request.param)


def read_csv(filename):
    with open(filename, "r", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
