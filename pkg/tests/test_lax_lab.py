import itertools
import math
import unittest

import numpy as np
from mock import patch

from torus_discretization.disjoint_set import DisjointSet
from torus_discretization.errors import DomainError, MatchingError, SearchError, TilingError
from torus_discretization.graph_core import analyze, random_permutation
from torus_discretization.lax_lab import (
    SNAKE_SPAN,
    LaxCertificate,
    SnakeOrder,
    alpern_cyclize,
    coarsen_image,
    collapse_to_short_cycle,
    cube_adjacency,
    hall_matching,
    lax_cyclic_approximation,
    replicate_cycles,
)
from torus_discretization.map_kit import DiscreteMap, builtin_map, discretize, grid_sup_distance
from torus_discretization.matching import HopcroftKarp, perfect_matching
from torus_discretization.test_maps import identity_map, shift_map, slow_tests_enabled
from torus_discretization.torus_grid import CellIndex, GridSpec, make_grid, unlin


def is_single_cycle(perm):
    perm = np.asarray(perm)
    x, steps = 0, 0
    while True:
        x = perm[x]
        steps += 1
        if x == 0:
            return steps == len(perm)


def snake_successor_map(k):
    g = make_grid(k)
    snake = SnakeOrder(g)
    table = np.empty(g.q, dtype=np.int64)
    table[snake.cells] = np.roll(snake.cells, -1)
    return DiscreteMap.from_table(g, table)


class DisjointSetTests(unittest.TestCase):
    def test_GIVEN_merges_WHEN_sets_queried_THEN_connected_elements_share_root(self):
        ds = DisjointSet(5)

        self.assertTrue(ds.merge(0, 3))
        self.assertTrue(ds.merge(3, 4))
        self.assertFalse(ds.merge(0, 4))

        self.assertEqual(ds.find(0), ds.find(4))
        self.assertNotEqual(ds.find(0), ds.find(1))
        self.assertEqual(3, ds.count)


class SnakeOrderTests(unittest.TestCase):
    def test_GIVEN_grid_WHEN_snake_built_THEN_consecutive_cells_edge_adjacent(self):
        for k in (2, 3, 4, 7):
            snake = SnakeOrder(make_grid(k))
            i, j = unlin(snake.cells, make_grid(k))

            steps = np.abs(np.diff(i)) + np.abs(np.diff(j))
            np.testing.assert_array_equal(np.ones(k * k - 1), steps)

    def test_GIVEN_grid_WHEN_snake_built_THEN_positions_invert_cells(self):
        snake = SnakeOrder(make_grid(5))

        np.testing.assert_array_equal(np.arange(25), snake.positions[snake.cells])
        self.assertEqual(9, snake.cell_at(5))
        self.assertEqual(5, snake.position_of(9))

    def test_GIVEN_odd_or_even_order_WHEN_snake_wraps_THEN_diagonal_only_when_odd(self):
        for k, diagonal in ((4, False), (5, True)):
            g = make_grid(k)
            snake = SnakeOrder(g)

            last = unlin(snake.cells[-1], g)

            self.assertEqual((k - 1, k - 1 if diagonal else 0), tuple(int(c) for c in last))

    def test_GIVEN_grid_WHEN_snake_wraps_THEN_seam_within_span(self):
        for k in (2, 3, 4, 7):
            g = make_grid(k)
            snake = SnakeOrder(g)
            (i0, j0), (i1, j1) = unlin(snake.cells[-1], g), unlin(snake.cells[0], g)
            di, dj = min(abs(i0 - i1), k - abs(i0 - i1)), min(abs(j0 - j1), k - abs(j0 - j1))

            self.assertLessEqual(math.hypot(di, dj), SNAKE_SPAN)


class CubeAdjacencyTests(unittest.TestCase):
    def test_GIVEN_identity_at_centers_WHEN_related_THEN_each_cube_to_itself(self):
        rel = cube_adjacency(builtin_map("identity"), make_grid(4), 1, 0.0)

        self.assertEqual([(c, c) for c in range(16)], rel.pairs())

    def test_GIVEN_anosov_at_centers_WHEN_related_THEN_each_cube_to_exact_image(self):
        g = make_grid(5)
        table = discretize(builtin_map("anosov"), g).table

        rel = cube_adjacency(builtin_map("anosov"), g, 1, 0.0)

        self.assertEqual([(c, int(table[c])) for c in range(25)], rel.pairs())

    def test_GIVEN_f1_WHEN_related_THEN_contains_discretization(self):
        g = make_grid(16)
        table = discretize(builtin_map("f1"), g).table

        rel = cube_adjacency(builtin_map("f1"), g, 3, 1 / 32)

        for c in range(g.q):
            self.assertIn(table[c], rel.neighbours[c])
            self.assertEqual(sorted(set(rel.neighbours[c])), list(rel.neighbours[c]))

    def test_GIVEN_no_samples_WHEN_related_THEN_domain_error(self):
        with self.assertRaises(DomainError):
            cube_adjacency(builtin_map("identity"), make_grid(4), 0, 0.0)


class HallMatchingTests(unittest.TestCase):
    def test_GIVEN_identity_relation_WHEN_matched_THEN_identity(self):
        np.testing.assert_array_equal(np.arange(5), hall_matching([[c] for c in range(5)], 5))

    def test_GIVEN_complete_relation_WHEN_matched_THEN_identity_by_lowest_index(self):
        np.testing.assert_array_equal([0, 1, 2], hall_matching([[0, 1, 2]] * 3, 3))

    def test_GIVEN_two_cells_sharing_one_target_WHEN_matched_THEN_witness_of_two(self):
        with self.assertRaises(MatchingError) as context:
            hall_matching([[0], [0], [1, 2]], 3)

        self.assertEqual((0, 1), context.exception.witness)
        self.assertEqual((0,), context.exception.neighbourhood)

    def test_GIVEN_relation_needing_augmentation_WHEN_matched_THEN_perfect(self):
        neighbours = [[0, 1], [0], [1, 2], [2, 3], [4]]

        self.assertEqual([1, 0, 2, 3, 4], perfect_matching(neighbours, 5))

    def test_GIVEN_wrong_number_of_lists_WHEN_matched_THEN_value_error(self):
        with self.assertRaises(ValueError):
            perfect_matching([[0]], 2)

    def test_GIVEN_random_relations_WHEN_matched_THEN_respects_relation(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            q = 40
            perm = rng.permutation(q)
            neighbours = [sorted({int(perm[c])} | set(rng.integers(0, q, 3).tolist())) for c in range(q)]

            sigma = hall_matching(neighbours, q)

            self.assertEqual(q, len(set(sigma.tolist())))
            for c in range(q):
                self.assertIn(sigma[c], neighbours[c])

    def test_GIVEN_maximum_matching_WHEN_not_perfect_THEN_witness_neighbourhood_smaller(self):
        matcher = HopcroftKarp([[0, 1], [0, 1], [0, 1], [2]], 4)
        matcher.run()

        witness, neighbourhood = matcher.hall_witness()

        self.assertEqual(len(witness) - 1, len(neighbourhood))


class AlpernCyclizeTests(unittest.TestCase):
    def assert_certified(self, s):
        tau, result = alpern_cyclize(s)

        self.assertTrue(is_single_cycle(result))
        self.assertLessEqual(int(np.max(np.abs(tau - np.arange(len(s))))), 2)
        np.testing.assert_array_equal(tau[np.asarray(s)], result)

    def test_GIVEN_identity_on_two_WHEN_cyclized_THEN_swap(self):
        tau, result = alpern_cyclize([0, 1])

        np.testing.assert_array_equal([1, 0], tau)
        np.testing.assert_array_equal([1, 0], result)

    def test_GIVEN_cycle_WHEN_cyclized_THEN_unchanged(self):
        s = [3, 4, 0, 1, 2]
        self.assertTrue(is_single_cycle(s))

        tau, result = alpern_cyclize(s)

        np.testing.assert_array_equal(np.arange(5), tau)
        np.testing.assert_array_equal(s, result)

    def test_GIVEN_every_permutation_of_seven_WHEN_cyclized_THEN_certified(self):
        for s in itertools.permutations(range(7)):
            self.assert_certified(list(s))

    def test_GIVEN_random_permutations_WHEN_cyclized_THEN_certified(self):
        count = 1000 if slow_tests_enabled() else 100
        for seed in range(count):
            self.assert_certified(random_permutation(4096, seed))

    def test_GIVEN_non_permutation_WHEN_cyclized_THEN_domain_error(self):
        with self.assertRaises(DomainError):
            alpern_cyclize([0, 0, 1])


class LaxApproximationTests(unittest.TestCase):
    def assert_certified(self, f, k):
        g = make_grid(k)

        result, certificate = lax_cyclic_approximation(f, g, 0.5)

        self.assertTrue(certificate.holds)
        self.assertTrue(certificate.is_cyclic)
        self.assertTrue(analyze(result)[0].is_cyclic_permutation)
        self.assertLessEqual(certificate.d_n, certificate.matching_d_n + math.sqrt(5) / k + 1e-12)
        self.assertEqual(certificate.d_n, grid_sup_distance(f, result))
        return certificate

    def test_GIVEN_identity_WHEN_approximated_THEN_certified_cycle(self):
        certificate = self.assert_certified(builtin_map("identity"), 8)

        self.assertEqual(0.0, certificate.matching_d_n)

    def test_GIVEN_anosov_on_five_WHEN_approximated_THEN_matching_is_exact(self):
        certificate = self.assert_certified(builtin_map("anosov"), 5)

        self.assertAlmostEqual(0.0, certificate.matching_d_n, places=12)
        self.assertLessEqual(certificate.d_n, math.sqrt(5) / 5 + 1e-12)

    def test_GIVEN_anosov_on_dyadic_grids_WHEN_approximated_THEN_matching_distance_zero(self):
        for k in (16, 32, 64):
            self.assertEqual(0.0, self.assert_certified(builtin_map("anosov"), k).matching_d_n)

    def test_GIVEN_f1_WHEN_approximated_THEN_certified_cycle(self):
        for k in (16, 32, 64):
            self.assert_certified(builtin_map("f1"), k)

    def test_GIVEN_coarse_grid_and_tiny_eps_WHEN_approximated_THEN_below_threshold(self):
        _, certificate = lax_cyclic_approximation(builtin_map("identity"), make_grid(2), 1e-6)

        self.assertTrue(certificate.below_threshold)
        self.assertTrue(certificate.holds)

    def test_GIVEN_non_positive_eps_WHEN_approximated_THEN_domain_error(self):
        with self.assertRaises(DomainError):
            lax_cyclic_approximation(builtin_map("identity"), make_grid(4), 0)

    def test_GIVEN_certificate_breaking_bound_WHEN_checked_THEN_does_not_hold(self):
        certificate = LaxCertificate(True, 2, d_n=0.5, matching_d_n=0.0, eps=1.0, k=16)

        self.assertFalse(certificate.holds)


class CollapseTests(unittest.TestCase):
    def test_GIVEN_snake_cycle_and_large_eps_WHEN_collapsed_THEN_fixed_point_with_one_tail(self):
        s = snake_successor_map(4)

        stats, _ = analyze(collapse_to_short_cycle(s, CellIndex(0, 0), 1.0, 16))

        self.assertEqual(1, stats.num_cycles)
        self.assertEqual(1, stats.card_omega)
        self.assertEqual(15, stats.stabilization_time)

    def test_GIVEN_eps_above_diameter_WHEN_collapsed_THEN_return_time_one(self):
        s = shift_map(5)

        stats, _ = analyze(collapse_to_short_cycle(s, CellIndex(2, 3), math.sqrt(2) / 2 + 0.01, 25))

        self.assertEqual(1, stats.card_omega)

    def test_GIVEN_random_cycles_WHEN_collapsed_THEN_single_tau_cycle_and_long_tail(self):
        rng = np.random.default_rng(9)
        for seed in range(100):
            k = int(rng.integers(2, 101))
            g = make_grid(k)
            _, cycle = alpern_cyclize(random_permutation(g.q, seed))
            s = DiscreteMap.from_table(g, cycle)
            x = CellIndex(int(rng.integers(0, k)), int(rng.integers(0, k)))

            stats, labeling = analyze(collapse_to_short_cycle(s, x, 0.3, g.q))
            tau = stats.card_omega

            self.assertEqual(1, stats.num_cycles)
            self.assertEqual(g.q - tau, stats.stabilization_time)
            np.testing.assert_array_equal([g.q], labeling.basin_count)

    def test_GIVEN_lax_output_for_f1_WHEN_collapsed_THEN_single_basin(self):
        g = make_grid(64)
        s, _ = lax_cyclic_approximation(builtin_map("f1"), g, 0.05)

        stats, labeling = analyze(collapse_to_short_cycle(s, CellIndex(10, 20), 0.05, g.q))

        self.assertEqual(1, stats.num_cycles)
        self.assertEqual(g.q - stats.card_omega, stats.stabilization_time)
        np.testing.assert_array_equal([g.q], labeling.basin_count)

    def test_GIVEN_no_return_WHEN_collapsed_THEN_search_error_with_best_distance(self):
        with self.assertRaises(SearchError) as context:
            collapse_to_short_cycle(shift_map(8), CellIndex(0, 0), 0.01, 3)

        self.assertAlmostEqual(1 / 8, context.exception.best_distance)

    def test_GIVEN_non_cyclic_map_WHEN_collapsed_THEN_domain_error(self):
        with self.assertRaises(DomainError):
            collapse_to_short_cycle(identity_map(4), CellIndex(0, 0), 1.0, 16)


class CoarsenImageTests(unittest.TestCase):
    def test_GIVEN_any_map_WHEN_coarsened_THEN_image_fits_coarse_lattice(self):
        s = discretize(builtin_map("f2"), make_grid(8))

        stats, _ = analyze(coarsen_image(s, 4))

        self.assertLessEqual(stats.image_card, 16)

    def test_GIVEN_identity_WHEN_coarsened_THEN_image_is_embedded_coarse_cells(self):
        g = make_grid(8)

        image = np.unique(coarsen_image(identity_map(8), 4).table)

        i, j = unlin(image, g)
        self.assertEqual(16, len(image))
        self.assertTrue(np.all(i % 2 == 0) and np.all(j % 2 == 0))

    def test_GIVEN_lax_output_for_f1_WHEN_coarsened_THEN_distance_grows_by_coarse_bound(self):
        f1, g = builtin_map("f1"), make_grid(64)
        s, certificate = lax_cyclic_approximation(f1, g, 0.05)

        coarse = coarsen_image(s, 8)

        self.assertLessEqual(analyze(coarse)[0].image_card, 64)
        self.assertLessEqual(
            grid_sup_distance(f1, coarse), certificate.d_n + math.sqrt(2) / 16 + 1e-12
        )

    def test_GIVEN_order_not_dividing_WHEN_coarsened_THEN_tiling_error(self):
        with self.assertRaises(TilingError):
            coarsen_image(identity_map(8), 3)

    @patch.object(GridSpec, "refines", return_value=False)
    def test_GIVEN_grid_not_refining_coarse_lattice_WHEN_coarsened_THEN_tiling_error(self, refines):
        with self.assertRaises(TilingError):
            coarsen_image(identity_map(8), 4)

        refines.assert_called_once_with(GridSpec(4))


class ReplicateCyclesTests(unittest.TestCase):
    def test_GIVEN_cycle_on_coarse_grid_WHEN_replicated_THEN_one_copy_per_block(self):
        for k0, k in ((4, 8), (4, 16), (16, 64)):
            base = shift_map(k0)

            stats, _ = analyze(replicate_cycles(base, make_grid(k)))

            self.assertEqual((((k0 * k0), (k // k0) ** 2),), stats.cycle_lengths)

    def test_GIVEN_lax_output_for_f1_WHEN_replicated_THEN_sixteen_cycles_of_256(self):
        base, _ = lax_cyclic_approximation(builtin_map("f1"), make_grid(16), 0.5)

        stats, _ = analyze(replicate_cycles(base, make_grid(64)))

        self.assertEqual(((256, 16),), stats.cycle_lengths)

    def test_GIVEN_non_refining_grid_WHEN_replicated_THEN_tiling_error(self):
        with self.assertRaises(TilingError):
            replicate_cycles(shift_map(4), make_grid(10))

    @patch.object(GridSpec, "refines", return_value=False)
    def test_GIVEN_grid_not_refining_base_WHEN_replicated_THEN_tiling_error(self, refines):
        with self.assertRaises(TilingError):
            replicate_cycles(shift_map(4), make_grid(8))

        refines.assert_called_once_with(make_grid(4))
