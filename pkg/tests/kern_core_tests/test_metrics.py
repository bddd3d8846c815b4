import unittest

import numpy as np

from numpy.testing import assert_array_equal
from parameterized import parameterized

from kern_core.domain.predicted_graph import PairPrediction, PredictedGraph
from kern_core.domain.relation_triplet import RankedTriplet
from kern_core.domain.task import Task
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.metrics import (ImageMatch, evaluate, evaluate_task, ground_truth_triplets, match_image,
                               mean_over_tasks, mean_recall_at_k, per_predicate_improvement, rank_triplets,
                               recall_at_k)
from tests.kern_core_tests.helpers import DOG, HORSE, ON, PERSON, RIDE, make_image


def one_hot_objects(labels, num_categories=4) -> np.ndarray:
    probs = np.zeros((len(labels), num_categories))
    probs[np.arange(len(labels)), labels] = 1.0
    return probs


class Metrics_Tests(unittest.TestCase):

    def test_constraint_should_keep_only_the_most_probable_predicate(self):
        graph = PredictedGraph("a", one_hot_objects([PERSON, HORSE]), [PairPrediction(0, 1, [0.1, 0.6, 0.3])])

        ranked = rank_triplets(graph, constraint=True)

        self.assertEqual(len(ranked), 1)
        self.assertEqual(ranked[0].predicate, 1)
        self.assertAlmostEqual(ranked[0].score, 0.6, places=15)

    def test_no_constraint_should_rank_every_predicate_but_no_relationship(self):
        graph = PredictedGraph("a", one_hot_objects([PERSON, HORSE]), [PairPrediction(0, 1, [0.1, 0.6, 0.3])])

        ranked = rank_triplets(graph, constraint=False)

        self.assertEqual([t.predicate for t in ranked], [1, 2])
        self.assertEqual([t.score for t in ranked], [0.6, 0.3])

    def test_score_should_multiply_object_and_predicate_probabilities(self):
        objects = np.array([[0.8, 0.2, 0.0, 0.0], [0.1, 0.0, 0.5, 0.4]])
        graph = PredictedGraph("a", objects, [PairPrediction(0, 1, [0.5, 0.5, 0.0])])

        ranked = rank_triplets(graph, constraint=True)

        self.assertAlmostEqual(ranked[0].score, 0.8 * 0.5 * 0.5, places=15)
        self.assertEqual((ranked[0].subj_label, ranked[0].obj_label), (PERSON, HORSE))

    def test_equal_scores_should_order_by_subject_object_and_predicate(self):
        pairs = [PairPrediction(1, 0, [0.0, 0.5, 0.5]), PairPrediction(0, 1, [0.0, 0.5, 0.5])]
        graph = PredictedGraph("a", one_hot_objects([PERSON, DOG]), pairs)

        ranked = rank_triplets(graph, constraint=False)

        self.assertEqual([(t.subj_idx, t.obj_idx, t.predicate) for t in ranked],
                         [(0, 1, 1), (0, 1, 2), (1, 0, 1), (1, 0, 2)])

    @parameterized.expand([
        ("negative", [-0.1, 0.6, 0.5]),
        ("above one", [0.0, 1.2, 0.0]),
    ])
    def test_probability_outside_unit_interval_should_raise_validation_error(self, _, probs):
        graph = PredictedGraph("a", one_hot_objects([PERSON, DOG]), [PairPrediction(0, 1, probs)])

        with self.assertRaises(ValidationException):
            rank_triplets(graph, constraint=True)

    def test_recall_should_count_the_hit_fraction_of_ground_truth(self):
        image = make_image("a", [PERSON, HORSE, DOG], [(0, 1, RIDE), (2, 0, ON)])
        graph = PredictedGraph("a", one_hot_objects([PERSON, HORSE, DOG]),
                               [PairPrediction(0, 1, [0.0, 0.9, 0.1]), PairPrediction(2, 0, [0.0, 0.8, 0.2])])

        ranked = rank_triplets(graph, constraint=True)

        self.assertEqual(recall_at_k(ranked, ground_truth_triplets(image), 1), 0.5)
        self.assertEqual(recall_at_k(rank_triplets(graph, constraint=False), ground_truth_triplets(image), 4), 1.0)

    def test_recall_without_predictions_should_be_zero(self):
        image = make_image("a", [PERSON, HORSE], [(0, 1, RIDE)])

        self.assertEqual(recall_at_k([], ground_truth_triplets(image), 50), 0.0)

    def test_recall_without_ground_truth_should_be_undefined(self):
        self.assertIsNone(recall_at_k([], [], 50))

    def test_recall_with_non_positive_k_should_raise_validation_error(self):
        with self.assertRaises(ValidationException):
            recall_at_k([], [], 0)

    def test_ground_truth_should_match_at_most_once(self):
        image = make_image("a", [PERSON, HORSE], [(0, 1, RIDE)])
        duplicate = RankedTriplet(0, 1, RIDE, 0.9, PERSON, HORSE)

        match = match_image([duplicate, duplicate], ground_truth_triplets(image), 2)

        assert_array_equal(match.ranks, [0])

    def test_iou_mode_should_match_shifted_boxes(self):
        image = make_image("a", [PERSON, HORSE], [(0, 1, RIDE)])
        boxes = image.boxes() + 0.1
        prediction = RankedTriplet(5, 7, RIDE, 0.9, PERSON, HORSE, boxes[0], boxes[1])
        far = RankedTriplet(0, 1, RIDE, 0.8, PERSON, HORSE, [15, 15, 16, 16], boxes[1])

        self.assertEqual(recall_at_k([prediction], ground_truth_triplets(image), 1, match_mode="iou"), 1.0)
        self.assertEqual(recall_at_k([far], ground_truth_triplets(image), 1, match_mode="iou"), 0.0)

    def test_single_predicate_dataset_should_have_mean_recall_equal_to_recall(self):
        matches = [ImageMatch("a", np.array([1, 1]), np.array([0, 70])),
                   ImageMatch("b", np.array([1]), np.array([3]))]

        mean, per_predicate = mean_recall_at_k(matches, 50, 3)

        self.assertEqual(mean, 0.75)
        self.assertEqual(per_predicate, [0.75, None])

    def test_perfect_recovery_of_one_in_five_predicates_should_give_a_fifth(self):
        predicates = np.arange(1, 6)
        ranks = np.array([0, 10 ** 6, 10 ** 6, 10 ** 6, 10 ** 6])

        mean, _ = mean_recall_at_k([ImageMatch("a", predicates, ranks)], 50, 6)

        self.assertAlmostEqual(mean, 0.2, places=15)

    @parameterized.expand([
        ("image", 0.5),
        ("dataset", 2 / 3),
    ])
    def test_pooling_should_choose_between_image_and_occurrence_averages(self, pooling, expected):
        matches = [ImageMatch("a", np.array([1, 1]), np.array([0, 1])),
                   ImageMatch("b", np.array([1]), np.array([99]))]

        mean, _ = mean_recall_at_k(matches, 50, 2, pooling=pooling)

        self.assertAlmostEqual(mean, expected, places=15)

    def test_unknown_pooling_should_raise_validation_error(self):
        with self.assertRaises(ValidationException):
            mean_recall_at_k([], 50, 2, pooling="micro")

    def test_missing_predictions_should_list_the_image_ids(self):
        images = [make_image("present", [PERSON, DOG], [(0, 1, ON)]), make_image("absent", [DOG, HORSE])]
        graph = PredictedGraph("present", one_hot_objects([PERSON, DOG]), [PairPrediction(0, 1, [0.2, 0.3, 0.5])])

        with self.assertRaises(ValidationException) as context:
            evaluate_task(images, [graph], Task.PredCls)

        self.assertIn("absent", context.exception.message)

    def test_single_image_report_should_equal_the_per_image_computation(self):
        image = make_image("a", [PERSON, HORSE, DOG], [(0, 1, RIDE), (2, 0, ON)])
        pairs = [PairPrediction(0, 1, [0.0, 0.9, 0.1]), PairPrediction(2, 0, [0.0, 0.8, 0.2]),
                 PairPrediction(1, 2, [0.1, 0.1, 0.8])]
        graph = PredictedGraph("a", one_hot_objects([PERSON, HORSE, DOG]), pairs)

        constrained, unconstrained = evaluate_task([image], [graph], Task.PredCls, ks=(1, 2, 3, 5))

        for k in (1, 2, 3, 5):
            ranked = rank_triplets(graph, constraint=True)
            self.assertEqual(constrained.recall[k], recall_at_k(ranked, ground_truth_triplets(image), k))
        self.assertEqual(constrained.recall[2], 0.5)
        self.assertEqual(constrained.mean_recall[2], 0.5)
        self.assertEqual(constrained.per_predicate_recall[2], [1.0, 0.0])
        self.assertEqual(unconstrained.recall[3], 0.5)
        self.assertEqual(unconstrained.recall[5], 1.0)
        self.assertEqual(constrained.gt_counts, [1, 1])

    def test_random_instances_should_match_brute_force_oracle(self):
        rng = np.random.default_rng(2024)

        for instance in range(200):
            n = int(rng.integers(1, 6))
            num_predicates = int(rng.integers(2, 5))
            labels = rng.integers(0, 3, size=n)
            all_pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
            chosen = [p for p in all_pairs if rng.random() < 0.5]
            triplets = [(i, j, int(rng.integers(1, num_predicates))) for i, j in chosen]
            image = make_image(f"r{instance}", labels, triplets)

            objects = rng.dirichlet(np.ones(3), size=n)
            objects[np.arange(n), labels] += rng.random(n)
            objects /= objects.sum(axis=1, keepdims=True)
            predictions = [PairPrediction(i, j, rng.dirichlet(np.ones(num_predicates))) for i, j in all_pairs]
            graph = PredictedGraph(image.image_id, objects, predictions)
            gt = ground_truth_triplets(image)

            for constraint in (True, False):
                ranked = rank_triplets(graph, constraint)
                for k in (1, 2, 3, 5, 50):
                    expected = self.exhaustive_recall(ranked[:k], gt)
                    self.assertEqual(recall_at_k(ranked, gt, k), expected)

    def test_recall_should_not_decrease_with_k_or_without_constraint(self):
        rng = np.random.default_rng(99)
        labels = [PERSON, HORSE, DOG, PERSON]
        images, graphs = [], []
        for index in range(20):
            pairs = [(i, j) for i in range(4) for j in range(4) if i != j]
            triplets = [(i, j, int(rng.integers(1, 3))) for i, j in pairs if rng.random() < 0.4]
            images.append(make_image(f"i{index}", labels, triplets))
            graphs.append(PredictedGraph(f"i{index}", one_hot_objects(labels),
                                         [PairPrediction(i, j, rng.dirichlet(np.ones(3))) for i, j in pairs]))

        constrained, unconstrained = evaluate_task(images, graphs, Task.PredCls, ks=(1, 3, 5, 30))

        for report in (constrained, unconstrained):
            self.assertEqual(sorted(report.recall.values()), [report.recall[k] for k in (1, 3, 5, 30)])
            self.assertEqual(sorted(report.mean_recall.values()), [report.mean_recall[k] for k in (1, 3, 5, 30)])
        self.assertGreaterEqual(unconstrained.recall[30], constrained.recall[30])
        self.assertEqual(unconstrained.recall[30], 1.0)

    def test_evaluate_should_report_each_task_and_mode(self):
        image = make_image("a", [PERSON, HORSE], [(0, 1, RIDE)])
        graph = PredictedGraph("a", one_hot_objects([PERSON, HORSE]), [PairPrediction(0, 1, [0.1, 0.7, 0.2]),
                                                                      PairPrediction(1, 0, [0.8, 0.1, 0.1])])

        reports = evaluate([image], {Task.SGCls: [graph], Task.PredCls: [graph]}, ks=(50, 100))

        self.assertEqual([(r.task, r.constraint) for r in reports],
                         [(Task.PredCls, True), (Task.PredCls, False), (Task.SGCls, True), (Task.SGCls, False)])
        averages = mean_over_tasks(reports)
        self.assertEqual(averages[True], {"recall": 1.0, "mean_recall": 1.0})

    def test_improvement_should_compare_per_predicate_recalls(self):
        image = make_image("a", [PERSON, HORSE, DOG], [(0, 1, RIDE), (2, 0, ON)])
        weak = PredictedGraph("a", one_hot_objects([PERSON, HORSE, DOG]),
                              [PairPrediction(0, 1, [0.0, 0.9, 0.1]), PairPrediction(2, 0, [0.0, 0.8, 0.2])])
        strong = PredictedGraph("a", one_hot_objects([PERSON, HORSE, DOG]),
                                [PairPrediction(0, 1, [0.0, 0.9, 0.1]), PairPrediction(2, 0, [0.0, 0.2, 0.8])])

        baseline = evaluate_task([image], [weak], Task.PredCls, ks=(50,))[0]
        candidate = evaluate_task([image], [strong], Task.PredCls, ks=(50,))[0]
        rows = per_predicate_improvement(baseline, candidate, 50)

        self.assertEqual([(r["predicate"], r["improvement"]) for r in rows], [(1, 0.0), (2, 1.0)])

    @parameterized.expand([
        ("more predicate classes", [PairPrediction(0, 1, [0.1, 0.3, 0.2, 0.2, 0.2])],
         one_hot_objects([PERSON, HORSE])),
        ("ragged predicate rows", [PairPrediction(0, 1, [0.1, 0.6, 0.3]), PairPrediction(1, 0, [0.5, 0.5])],
         one_hot_objects([PERSON, HORSE])),
        ("fewer object classes", [PairPrediction(0, 1, [0.1, 0.6, 0.3])], one_hot_objects([PERSON, HORSE], 3)),
        ("more regions than the image", [PairPrediction(0, 1, [0.1, 0.6, 0.3])],
         one_hot_objects([PERSON, HORSE, DOG])),
    ])
    def test_predictions_off_the_schema_should_raise_validation_error(self, _, pairs, objects):
        image = make_image("a", [PERSON, HORSE], [(0, 1, RIDE)])
        graph = PredictedGraph("a", objects, pairs)

        with self.assertRaises(ValidationException):
            evaluate([image], {Task.PredCls: [graph]}, ks=(50,), num_predicates=3, num_categories=4)

    def test_ragged_predicate_rows_should_fail_ranking(self):
        graph = PredictedGraph("a", one_hot_objects([PERSON, HORSE]),
                               [PairPrediction(0, 1, [0.1, 0.6, 0.3]), PairPrediction(1, 0, [0.5, 0.5])])

        with self.assertRaises(ValidationException):
            rank_triplets(graph, constraint=True)

    def test_ragged_object_rows_should_fail_parsing(self):
        record = {"image_id": "a", "objects": [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0]], "pairs": []}

        with self.assertRaises(ValidationException):
            PredictedGraph.parse(record)

    def test_prediction_for_a_truncated_image_should_be_evaluated(self):
        image = make_image("a", [PERSON, HORSE, DOG], [(0, 1, RIDE), (2, 0, ON)])
        graph = PredictedGraph("a", one_hot_objects([PERSON, HORSE]), [PairPrediction(0, 1, [0.1, 0.6, 0.3])])

        constrained, _ = evaluate_task([image], [graph], Task.PredCls, ks=(50,), num_predicates=3, num_categories=4)

        self.assertEqual(constrained.recall[50], 0.5)

    @staticmethod
    def exhaustive_recall(predictions, gt) -> float:
        """Largest one-to-one assignment of predictions to ground truth, found by enumeration."""
        def _matches(p, g) -> bool:
            return (p.subj_idx, p.obj_idx, p.predicate, p.subj_label, p.obj_label) == \
                (g.subj_idx, g.obj_idx, g.predicate, g.subj_label, g.obj_label)

        def _best(index: int, used: frozenset) -> int:
            if index == len(gt):
                return 0
            candidates = [position for position, prediction in enumerate(predictions)
                          if position not in used and _matches(prediction, gt[index])]
            # a candidate no later ground truth can use is always worth taking
            shared = any(_matches(predictions[p], g) for p in candidates for g in gt[index + 1:])
            best = _best(index + 1, used) if shared or not candidates else 0
            for position in candidates:
                best = max(best, 1 + _best(index + 1, used | {position}))
            return best

        return _best(0, frozenset()) / len(gt) if gt else None


if __name__ == '__main__':
    unittest.main()
