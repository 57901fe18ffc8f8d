import math
import os
import tempfile
import unittest
from fractions import Fraction

import numpy as np

from torus_discretization.errors import ConsistencyError, DomainError, TilingError
from torus_discretization.ergo_measure import (
    FLOOR,
    DiscreteMeasure,
    average_measures,
    coarse_density,
    coarse_total_variation,
    invariant_measure,
    load_density,
    pushforward,
    restricted_measure,
    save_density,
)
from torus_discretization.graph_core import analyze, random_endomap
from torus_discretization.map_kit import BUILTIN_MAPS, DiscreteMap, builtin_map, discretize
from torus_discretization.test_maps import (
    TEST_Q6_CYCLE,
    constant_map,
    identity_map,
    q6_map,
    q6_on_k6_map,
    shift_map,
    slow_tests_enabled,
)
from torus_discretization.torus_grid import make_grid


def measure_of(s):
    return invariant_measure(s, analyze(s)[1])


def cesaro_average(s, steps):
    """
    Averages the pushforwards of the uniform measure over the first steps iterates.
    """
    q = len(s)
    counts = np.zeros(q, dtype=np.int64)
    cells = np.arange(q)
    for _ in range(steps):
        counts += np.bincount(cells, minlength=q)
        cells = s.image(cells)
    return counts / (q * steps)


class InvariantMeasureTests(unittest.TestCase):
    def test_GIVEN_identity_WHEN_measure_built_THEN_uniform(self):
        m = measure_of(identity_map(4))

        self.assertEqual(16, len(m.as_dict()))
        self.assertTrue(all(mass == Fraction(1, 16) for mass in m.as_dict().values()))

    def test_GIVEN_constant_map_WHEN_measure_built_THEN_dirac_at_fixed_point(self):
        m = measure_of(constant_map(2, 3))

        self.assertEqual({3: Fraction(1)}, m.as_dict())

    def test_GIVEN_cycle_with_tail_WHEN_measure_built_THEN_three_atoms_of_one_third(self):
        m = measure_of(q6_map())

        self.assertEqual({c: Fraction(1, 3) for c in TEST_Q6_CYCLE}, m.as_dict())

    def test_GIVEN_cycle_with_tail_WHEN_cesaro_average_taken_THEN_converges_to_measure(self):
        s = q6_map()
        m = measure_of(s)

        average = cesaro_average(s, 10**4)

        for cell in range(6):
            self.assertAlmostEqual(float(m.mass_of(cell)), average[cell], places=3)

    def test_GIVEN_cyclic_permutation_WHEN_measure_built_THEN_max_atom_one_over_q(self):
        self.assertEqual(Fraction(1, 25), measure_of(shift_map(5)).max_atom())

    def test_GIVEN_labeling_of_other_map_WHEN_measure_built_THEN_consistency_error(self):
        _, labeling = analyze(identity_map(4))

        with self.assertRaises(ConsistencyError):
            invariant_measure(shift_map(4), labeling)

    def test_GIVEN_labeling_of_other_size_WHEN_measure_built_THEN_consistency_error(self):
        _, labeling = analyze(identity_map(4))

        with self.assertRaises(ConsistencyError):
            invariant_measure(identity_map(5), labeling)


class MeasureExactnessTests(unittest.TestCase):
    def assert_exact(self, s):
        stats, labeling = analyze(s)
        m = invariant_measure(s, labeling)

        self.assertEqual(Fraction(1), m.total_mass())
        np.testing.assert_array_equal(labeling.omega_cells(), m.support())
        for cells in labeling.cycle_cells():
            self.assertEqual(1, len({m.mass_of(c) for c in cells}))
        self.assertEqual(m, pushforward(m, s))

    def test_GIVEN_builtin_discretizations_WHEN_measures_built_THEN_exact(self):
        for name in BUILTIN_MAPS:
            for k in (8, 16, 32, 64):
                self.assert_exact(discretize(builtin_map(name), make_grid(k)))

    def test_GIVEN_random_maps_WHEN_measures_built_THEN_exact(self):
        count = 1000 if slow_tests_enabled() else 50
        for seed in range(count):
            self.assert_exact(random_endomap(4096, seed))


class RestrictedMeasureTests(unittest.TestCase):
    def test_GIVEN_all_cells_WHEN_restricted_THEN_equals_invariant_measure(self):
        s = random_endomap(500, 3)

        self.assertEqual(measure_of(s), restricted_measure(s, np.arange(500)))

    def test_GIVEN_single_tail_cell_WHEN_restricted_THEN_uniform_on_its_cycle(self):
        m = restricted_measure(q6_map(), [5])

        self.assertEqual({c: Fraction(1, 3) for c in TEST_Q6_CYCLE}, m.as_dict())

    def test_GIVEN_half_grid_under_identity_WHEN_restricted_THEN_uniform_on_half(self):
        cells = np.arange(8)

        m = restricted_measure(identity_map(4), cells)

        self.assertEqual({c: Fraction(1, 8) for c in range(8)}, m.as_dict())

    def test_GIVEN_empty_subset_WHEN_restricted_THEN_domain_error(self):
        with self.assertRaises(DomainError):
            restricted_measure(identity_map(4), [])

    def test_GIVEN_negative_cell_WHEN_restricted_THEN_domain_error(self):
        s = DiscreteMap.from_table(make_grid(2), np.array([1, 0, 3, 2]))

        with self.assertRaises(DomainError):
            restricted_measure(s, [-1])

    def test_GIVEN_cell_past_last_WHEN_restricted_THEN_domain_error(self):
        s = DiscreteMap.from_table(make_grid(2), np.array([1, 0, 3, 2]))

        with self.assertRaises(DomainError) as context:
            restricted_measure(s, [0, 4])

        self.assertIn("[4]", str(context.exception))

    def test_GIVEN_subset_WHEN_singletons_averaged_THEN_equals_restricted_measure(self):
        for name in ("f1", "f4"):
            s = discretize(builtin_map(name), make_grid(16))
            _, labeling = analyze(s)
            subset = np.arange(0, s.grid.q, 7)

            singletons = [restricted_measure(s, [c], labeling) for c in subset]
            weights = [Fraction(1, len(subset))] * len(subset)

            self.assertEqual(
                restricted_measure(s, subset, labeling), average_measures(singletons, weights)
            )


class CoarseDensityTests(unittest.TestCase):
    def test_GIVEN_uniform_measure_WHEN_coarsened_THEN_every_pixel_at_log_of_pixel_share(self):
        img = coarse_density(measure_of(identity_map(128)), 128)

        np.testing.assert_allclose(img.values, math.log10(1 / 16384))
        self.assertAlmostEqual(-4.2144, img.values[0, 0], places=4)

    def test_GIVEN_dirac_WHEN_coarsened_THEN_one_pixel_at_zero_rest_floor(self):
        img = coarse_density(measure_of(constant_map(8, 9)), 4)

        self.assertEqual(0.0, img.values[0, 0])
        self.assertEqual(15, int(np.sum(img.values == FLOOR)))

    def test_GIVEN_q6_cycle_on_k6_WHEN_coarsened_THEN_three_pixels_at_one_third(self):
        img = coarse_density(measure_of(q6_on_k6_map()), 6)

        for b in TEST_Q6_CYCLE:
            self.assertAlmostEqual(math.log10(1 / 3), img.values[0, b])
        self.assertEqual(33, int(np.sum(img.values == FLOOR)))

    def test_GIVEN_coarse_pixels_WHEN_coarsened_THEN_masses_sum_to_one(self):
        s = discretize(builtin_map("f4"), make_grid(64))

        img = coarse_density(measure_of(s), 16)

        finite = img.values[img.values > FLOOR]
        self.assertLessEqual(abs(np.sum(10.0**finite) - 1.0), 2**-40)

    def test_GIVEN_pixels_not_tiling_grid_WHEN_coarsened_THEN_tiling_error(self):
        with self.assertRaises(TilingError):
            coarse_density(measure_of(identity_map(10)), 4)

    def test_GIVEN_density_WHEN_saved_and_loaded_THEN_values_preserved(self):
        img = coarse_density(measure_of(q6_on_k6_map()), 6)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "density.npy")

            save_density(img, path)
            loaded = load_density(path)

        self.assertEqual(6, loaded.px)
        np.testing.assert_array_equal(img.values, loaded.values)


class TotalVariationTests(unittest.TestCase):
    def test_GIVEN_same_measure_WHEN_compared_THEN_zero(self):
        m = measure_of(discretize(builtin_map("f1"), make_grid(16)))

        self.assertEqual(0.0, coarse_total_variation(m, m, 8))

    def test_GIVEN_dirac_and_uniform_WHEN_compared_THEN_one_minus_pixel_share(self):
        dirac = measure_of(constant_map(128, 0))
        uniform = measure_of(identity_map(128))

        self.assertAlmostEqual(1 - 1 / 16384, coarse_total_variation(dirac, uniform, 128))

    def test_GIVEN_random_measures_WHEN_compared_THEN_pseudometric(self):
        g = make_grid(8)
        measures = [
            measure_of(DiscreteMap.from_table(g, random_endomap(g.q, seed).table))
            for seed in range(6)
        ]
        for a in measures:
            for b in measures:
                ab = coarse_total_variation(a, b, 4)
                self.assertEqual(ab, coarse_total_variation(b, a, 4))
                self.assertTrue(0.0 <= ab <= 1.0)
                for c in measures:
                    self.assertLessEqual(
                        ab, coarse_total_variation(a, c, 4) + coarse_total_variation(c, b, 4) + 1e-15
                    )

    def test_GIVEN_grids_of_different_orders_WHEN_compared_THEN_compared_by_pixel(self):
        coarse, fine = measure_of(identity_map(8)), measure_of(identity_map(16))

        self.assertEqual(0.0, coarse_total_variation(coarse, fine, 8))

    def test_GIVEN_measure_on_its_own_WHEN_built_from_masses_THEN_zero_masses_dropped(self):
        m = DiscreteMeasure.from_masses(make_grid(2), {0: Fraction(1), 1: Fraction(0)})

        self.assertEqual([0], m.support().tolist())
