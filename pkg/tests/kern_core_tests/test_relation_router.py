import unittest

import numpy as np

from numpy.testing import assert_allclose, assert_array_equal
from parameterized import parameterized

from kern_core.domain.knowledge_base import KnowledgeBase
from kern_core.domain.task import Task
from kern_core.exceptions.DimensionException import DimensionException
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.gru_cell import gru_cell
from kern_core.object_router import ObjectRouterParams
from kern_core.parameter_set import ParameterSet
from kern_core.relation_router import (PairBatch, PairInput, RelationRouterParams, aggregate_pair_messages,
                                       classify_relation, encode_union, init_pair_hidden, predict_graph,
                                       propagate_pair, route_pairs)
from kern_core.tensor import Tensor, cross_entropy
from tests.kern_core_tests.helpers import (DOG, HORSE, PERSON, make_image, make_schema, numeric_gradient,
                                           relative_error, zero_gru)


class RelationRouter_Tests(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(17)

    def create_router(self, num_predicates=3, feature_dim=2, hidden_dim=4, output_dim=2, steps=2,
                      params=None) -> RelationRouterParams:
        return RelationRouterParams.create(params or ParameterSet(), num_predicates, feature_dim, hidden_dim,
                                           output_dim, steps, self.rng)

    def create_pair(self, feature_dim=2) -> PairInput:
        subj, obj = self.rng.standard_normal(feature_dim), self.rng.standard_normal(feature_dim)
        union = encode_union([0, 0, 2, 2], [1, 1, 3, 4], subj, obj, 4.0, 5.0)
        return PairInput(subj, obj, union, PERSON, HORSE)

    def test_union_of_overlapping_boxes_should_encode_geometry_and_iou(self):
        union = encode_union([0, 0, 2, 2], [1, 1, 3, 3], np.array([1.0, 3.0]), np.array([3.0, 5.0]), 4.0, 4.0)

        assert_allclose(union[:2], [2.0, 4.0])
        assert_allclose(union[2:], [0.25, 0.25, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1 / 7], atol=1e-15)

    def test_union_of_identical_regions_should_have_equal_halves_and_full_iou(self):
        feature = np.array([0.5, -1.0])

        union = encode_union([1, 2, 3, 4], [1, 2, 3, 4], feature, feature, 8.0, 8.0)

        assert_array_equal(union[2:6], union[6:10])
        self.assertEqual(union[-1], 1.0)

    def test_union_of_disjoint_boxes_should_have_zero_iou(self):
        union = encode_union([0, 0, 1, 1], [2, 2, 3, 3], np.zeros(2), np.zeros(2), 4.0, 4.0)

        self.assertEqual(union[-1], 0.0)

    def test_union_of_degenerate_box_should_raise_validation_error(self):
        with self.assertRaises(ValidationException):
            encode_union([1, 1, 1, 3], [0, 0, 2, 2], np.zeros(2), np.zeros(2), 4.0, 4.0)

    def test_zero_projections_should_give_zero_states(self):
        router = self.create_router()
        for tensor in (router.object_init_weight, router.union_init_weight):
            tensor.data = np.zeros_like(tensor.data)

        h0 = init_pair_hidden(self.create_pair(), router)

        self.assertEqual(h0.shape, (5, 4))
        assert_array_equal(h0.data, np.zeros((5, 4)))

    def test_relation_nodes_should_share_the_initial_state(self):
        h0 = init_pair_hidden(self.create_pair(), self.create_router()).data

        for k in range(3, 5):
            assert_array_equal(h0[k], h0[2])

    def test_object_nodes_should_start_from_projected_region_features(self):
        router = self.create_router()
        pair = self.create_pair()

        h0 = init_pair_hidden(pair, router).data

        expected = router.object_init_weight.data @ pair.subj_feature + router.object_init_bias.data
        assert_allclose(h0[0], expected, atol=1e-12)

    def test_subject_should_hear_the_fiber_weighted_relation_nodes(self):
        h = Tensor([[1.0], [3.0], [2.0], [4.0]])

        messages = aggregate_pair_messages(h, np.array([0.75, 0.25])).data

        self.assertEqual(messages[0, 0], 2.5)
        self.assertEqual(messages[1, 0], 2.5)
        assert_allclose(messages[2:, 0], [0.75 * 4.0, 0.25 * 4.0])

    def test_uniform_fiber_over_equal_relation_states_should_pass_the_state_on(self):
        v = np.array([0.5, -1.5])
        h = Tensor(np.vstack([np.zeros((2, 2)), np.tile(v, (4, 1))]))

        messages = aggregate_pair_messages(h, np.full(4, 0.25)).data

        assert_allclose(messages[0], v, atol=1e-15)

    def test_one_hot_fiber_should_gate_every_other_relation_node(self):
        h = Tensor(self.rng.standard_normal((5, 3)))

        messages = aggregate_pair_messages(h, np.array([0.0, 1.0, 0.0])).data

        assert_array_equal(messages[2], np.zeros(3))
        assert_array_equal(messages[4], np.zeros(3))
        assert_allclose(messages[3], h.data[0] + h.data[1], atol=1e-15)

    def test_aggregation_should_be_linear_in_the_states(self):
        fiber = self.rng.dirichlet(np.ones(3))
        first, second = self.rng.standard_normal((5, 2)), self.rng.standard_normal((5, 2))

        combined = aggregate_pair_messages(Tensor(2.0 * first - 3.0 * second), fiber).data
        separate = 2.0 * aggregate_pair_messages(Tensor(first), fiber).data \
            - 3.0 * aggregate_pair_messages(Tensor(second), fiber).data

        assert_allclose(combined, separate, atol=1e-12)

    def test_fiber_of_wrong_length_should_raise_dimension_error(self):
        with self.assertRaises(DimensionException):
            aggregate_pair_messages(Tensor(np.zeros((5, 2))), np.full(2, 0.5))

    def test_propagation_with_zero_gru_should_decay_by_half_per_step(self):
        router = self.create_router(steps=3)
        zero_gru(router.params, router.gru_prefix)
        h0 = self.rng.standard_normal((5, 4))

        hT = propagate_pair(Tensor(h0), self.rng.dirichlet(np.ones(3)), router)

        assert_allclose(hT.data, 0.125 * h0, atol=1e-15)

    def test_zero_fiber_entry_should_leave_its_node_on_self_recurrence(self):
        router = self.create_router()
        h0 = self.rng.standard_normal((5, 4))
        fiber = np.array([0.0, 0.6, 0.4])

        hT = propagate_pair(Tensor(h0), fiber, router).data

        isolated = Tensor(h0[2])
        for _ in range(router.steps):
            isolated = gru_cell(Tensor(np.zeros(4)), isolated, router.params, router.gru_prefix)
        assert_allclose(hT[2], isolated.data, atol=1e-12)

    def test_zero_classifier_weights_should_return_the_bias(self):
        router = self.create_router()
        router.classifier_weight.data = np.zeros_like(router.classifier_weight.data)
        router.classifier_bias.data = np.array([0.3, -0.1, 0.2])
        h = Tensor(self.rng.standard_normal((5, 4)))

        assert_array_equal(classify_relation(h, h, router).data, [0.3, -0.1, 0.2])

    def test_batched_routing_should_equal_single_pairs(self):
        router = self.create_router()
        pairs = [self.create_pair() for _ in range(3)]
        fibers = self.rng.dirichlet(np.ones(3), size=3)

        batched = route_pairs(PairBatch.from_pairs(pairs), fibers, router).data

        for row, pair in enumerate(pairs):
            assert_allclose(batched[row], route_pairs(pair, fibers[row], router).data, atol=1e-12)

    def test_direction_should_matter_when_the_prior_is_asymmetric(self):
        router = self.create_router()
        pair = self.create_pair()
        swapped = PairInput(pair.obj_feature, pair.subj_feature, pair.union_feature, pair.obj_label, pair.subj_label)

        forward = route_pairs(pair, np.array([0.1, 0.8, 0.1]), router).data
        backward = route_pairs(swapped, np.array([0.7, 0.1, 0.2]), router).data

        self.assertFalse(np.allclose(forward, backward))

    def test_gradients_through_the_whole_router_should_match_finite_differences(self):
        router = self.create_router(num_predicates=3, feature_dim=3, hidden_dim=8, output_dim=3, steps=2)
        pairs = PairBatch.from_pairs([self.create_pair(3) for _ in range(2)])
        fibers = self.rng.dirichlet(np.ones(3), size=2)
        targets = [1, 0]

        def _loss() -> float:
            return cross_entropy(route_pairs(pairs, fibers, router), targets).item()

        router.params.zero_grad()
        cross_entropy(route_pairs(pairs, fibers, router), targets).backward()

        for name, tensor in router.params.items():
            analytic = tensor.grad.copy()
            numeric = numeric_gradient(_loss, tensor.data)
            self.assertLessEqual(relative_error(analytic, numeric), 1e-5, name)


class PredictGraph_Tests(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(23)
        schema = make_schema()
        self.kb = KnowledgeBase(schema, np.full((4, 4), 0.5), rng.dirichlet(np.ones(3), size=(4, 4)))
        params = ParameterSet()
        self.objects = ObjectRouterParams.create(params, 4, 2, 4, 2, 2, rng)
        self.relations = RelationRouterParams.create(params, 3, 2, 4, 2, 2, rng)
        self.rng = rng

    def create_image(self, labels):
        return make_image("image", labels, features=self.rng.standard_normal((len(labels), 2)))

    @parameterized.expand([
        ("two regions", [PERSON, HORSE], 2),
        ("three regions", [PERSON, HORSE, DOG], 6),
        ("single region", [DOG], 0),
    ])
    def test_predcls_should_score_every_ordered_pair(self, _, labels, expected_pairs):
        graph = predict_graph(self.create_image(labels), self.kb, self.objects, self.relations, Task.PredCls)

        self.assertEqual(len(graph.pairs), expected_pairs)
        assert_array_equal(graph.object_labels(), labels)
        assert_array_equal(graph.object_scores(), np.ones(len(labels)))
        for pair in graph.pairs:
            self.assertAlmostEqual(float(pair.probs.sum()), 1.0, places=12)

    def test_image_without_regions_should_give_an_empty_graph(self):
        graph = predict_graph(make_image("empty", []), self.kb, self.objects, self.relations, Task.SGCls)

        self.assertEqual(graph.num_regions, 0)
        self.assertEqual(graph.pairs, [])

    def test_sgcls_on_separable_features_should_equal_predcls(self):
        params = ParameterSet()
        objects = ObjectRouterParams.create(params, 4, 4, 4, 4, 2, self.rng)
        relations = RelationRouterParams.create(params, 3, 4, 4, 2, 2, self.rng)
        objects.init_weight.data = np.eye(4)
        objects.init_bias.data = np.zeros(4)
        objects.output_weight.data = np.hstack([np.eye(4), np.zeros((4, 4))])
        objects.output_bias.data = np.zeros(4)
        objects.classifier_weight.data = np.hstack([50.0 * np.eye(4), np.zeros((4, 12))])
        objects.classifier_bias.data = np.zeros(4)
        labels = [PERSON, HORSE, DOG, HORSE]
        image = make_image("image", labels, features=np.eye(4)[labels])

        sgcls = predict_graph(image, self.kb, objects, relations, Task.SGCls)
        predcls = predict_graph(image, self.kb, objects, relations, Task.PredCls)

        assert_array_equal(sgcls.object_labels(), labels)
        self.assertEqual([(p.subj, p.obj) for p in sgcls.pairs], [(p.subj, p.obj) for p in predcls.pairs])
        for sgcls_pair, predcls_pair in zip(sgcls.pairs, predcls.pairs):
            assert_array_equal(sgcls_pair.probs, predcls_pair.probs)

    def test_sgcls_should_return_object_distributions(self):
        graph = predict_graph(self.create_image([PERSON, HORSE, DOG]), self.kb, self.objects, self.relations,
                              Task.SGCls)

        self.assertEqual(graph.object_probs.shape, (3, 4))
        assert_allclose(graph.object_probs.sum(axis=1), np.ones(3), atol=1e-12)
        self.assertEqual(len(graph.pairs), 6)

    def test_region_cap_should_truncate_large_images(self):
        graph = predict_graph(self.create_image([PERSON, HORSE, DOG, PERSON]), self.kb, self.objects,
                              self.relations, Task.PredCls, max_regions=3)

        self.assertEqual(graph.num_regions, 3)
        self.assertEqual(len(graph.pairs), 6)

    def test_pair_chunking_should_not_change_the_result(self):
        image = self.create_image([PERSON, HORSE, DOG, PERSON])

        whole = predict_graph(image, self.kb, self.objects, self.relations, Task.PredCls)
        chunked = predict_graph(image, self.kb, self.objects, self.relations, Task.PredCls, pair_batch_size=5)

        self.assertEqual([(p.subj, p.obj) for p in whole.pairs], [(p.subj, p.obj) for p in chunked.pairs])
        for first, second in zip(whole.pairs, chunked.pairs):
            assert_allclose(first.probs, second.probs, atol=1e-12)


if __name__ == '__main__':
    unittest.main()
