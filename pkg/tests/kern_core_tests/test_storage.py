import tempfile
import unittest

from pathlib import Path

import numpy as np

from numpy.testing import assert_array_equal

from kern_core.configuration.synth_config import SynthConfig
from kern_core.domain.predicted_graph import PairPrediction, PredictedGraph
from kern_core.exceptions.FormatException import FormatException
from kern_core.exceptions.ValidationException import ValidationException
from kern_core.knowledge_stats import build_knowledge_base
from kern_core.parameter_set import ParameterSet
from kern_core.storage.annotation_storage import AnnotationStorage, SchemaStorage
from kern_core.storage.checkpoint_storage import CheckpointStorage
from kern_core.storage.knowledge_base_storage import KnowledgeBaseStorage
from kern_core.storage.prediction_storage import PredictionStorage
from kern_core.storage.process_storage import ProcessStorage
from kern_core.storage.training_log_storage import EpochRecord, TrainingLogStorage
from kern_core.synth_gen import GroundTruthProcess, build_process
from tests.kern_core_tests.helpers import DOG, HORSE, ON, PERSON, RIDE, make_image, make_schema


class Storage_Tests(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)
        self.schema = make_schema()
        self.images = [make_image("a", [PERSON, HORSE], [(0, 1, RIDE)], features=np.eye(2, 3)),
                       make_image("b", [DOG, PERSON, HORSE], [(1, 2, ON)], features=np.ones((3, 3)))]

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_knowledge_base_should_survive_save_and_load(self):
        kb = build_knowledge_base(self.images, self.schema)
        storage = KnowledgeBaseStorage(self.root / "knowledge.kb")

        storage.save(kb)

        self.assertEqual(storage.load(), kb)

    def test_knowledge_base_with_wrong_magic_should_raise_format_error(self):
        path = self.root / "knowledge.kb"
        KnowledgeBaseStorage(path).save(build_knowledge_base(self.images, self.schema))
        data = bytearray(path.read_bytes())
        data[0:4] = b"XXXX"
        path.write_bytes(bytes(data))

        with self.assertRaises(FormatException) as context:
            KnowledgeBaseStorage(path).load()

        self.assertIn(str(path), context.exception.message)

    def test_knowledge_base_with_corrupted_payload_should_raise_format_error(self):
        path = self.root / "knowledge.kb"
        KnowledgeBaseStorage(path).save(build_knowledge_base(self.images, self.schema))
        data = bytearray(path.read_bytes())
        data[-40] ^= 0xFF
        path.write_bytes(bytes(data))

        with self.assertRaises(FormatException):
            KnowledgeBaseStorage(path).load()

    def test_truncated_knowledge_base_should_raise_format_error(self):
        path = self.root / "knowledge.kb"
        KnowledgeBaseStorage(path).save(build_knowledge_base(self.images, self.schema))
        path.write_bytes(path.read_bytes()[:20])

        with self.assertRaises(FormatException):
            KnowledgeBaseStorage(path).load()

    def test_checkpoint_should_survive_save_and_load(self):
        params = ParameterSet()
        params.add("object.init.weight", np.arange(6.0).reshape(2, 3))
        params.add("object.init.bias", np.array([0.5, -0.25]))
        storage = CheckpointStorage(self.root / "model.ckpt")

        storage.save(params)
        loaded = storage.load()

        self.assertEqual(loaded.names(), params.names())
        for name, tensor in params.items():
            assert_array_equal(loaded[name].data, tensor.data)

    def test_checkpoint_with_wrong_magic_should_raise_format_error(self):
        path = self.root / "model.ckpt"
        path.write_bytes(b"NOTACKPT" + bytes(64))

        with self.assertRaises(FormatException):
            CheckpointStorage(path).load()

    def test_annotations_should_survive_save_and_load(self):
        storage = AnnotationStorage(self.root / "train.jsonl")

        storage.save(self.images)
        loaded = storage.load(self.schema)

        self.assertEqual([i.image_id for i in loaded], ["a", "b"])
        assert_array_equal(loaded[1].labels(), [DOG, PERSON, HORSE])
        assert_array_equal(loaded[0].features(), np.eye(2, 3))
        self.assertEqual([(t.subj, t.obj, t.predicate) for t in loaded[1].triplets], [(1, 2, ON)])

    def test_annotation_line_with_invalid_json_should_name_the_line(self):
        path = self.root / "train.jsonl"
        AnnotationStorage(path).save(self.images)
        with path.open("a", encoding="utf-8") as f:
            f.write("{not json\n")

        with self.assertRaises(FormatException) as context:
            AnnotationStorage(path).load(self.schema)

        self.assertEqual(context.exception.line_number, 3)

    def test_annotation_with_label_outside_schema_should_raise_format_error(self):
        path = self.root / "train.jsonl"
        AnnotationStorage(path).save([make_image("bad", [PERSON, 12])])

        with self.assertRaises(FormatException) as context:
            AnnotationStorage(path).load(self.schema)

        self.assertEqual(context.exception.line_number, 1)

    def test_regions_with_features_of_different_lengths_should_fail(self):
        image = make_image("mixed", [PERSON, HORSE], [(0, 1, RIDE)], features=[[1.0, 0.0, 0.0], [0.0, 1.0]])
        path = self.root / "train.jsonl"
        AnnotationStorage(path).save([image])

        with self.assertRaises(ValidationException):
            image.validate(self.schema)
        with self.assertRaises(FormatException) as context:
            AnnotationStorage(path).load(self.schema)

        self.assertEqual(context.exception.line_number, 1)

    def test_annotations_with_duplicate_ids_should_raise_format_error(self):
        path = self.root / "train.jsonl"
        AnnotationStorage(path).save([make_image("same", [PERSON]), make_image("same", [DOG])])

        with self.assertRaises(FormatException):
            AnnotationStorage(path).load(self.schema)

    def test_schema_should_survive_save_and_load(self):
        storage = SchemaStorage(self.root / "schema.json")

        storage.save(self.schema)

        self.assertEqual(storage.load(), self.schema)

    def test_schema_without_no_relationship_first_should_raise_format_error(self):
        path = self.root / "schema.json"
        path.write_text('{"categories": ["a"], "predicates": ["ride", "no-relationship"]}', encoding="utf-8")

        with self.assertRaises(FormatException):
            SchemaStorage(path).load()

    def test_predictions_should_survive_save_and_load(self):
        graph = PredictedGraph("a", np.array([[0.9, 0.1], [0.2, 0.8]]),
                               [PairPrediction(0, 1, [0.5, 0.5]), PairPrediction(1, 0, [0.25, 0.75])])
        storage = PredictionStorage(self.root / "predictions.jsonl")

        storage.save([graph])
        loaded = storage.load()[0]

        self.assertEqual(loaded.image_id, "a")
        assert_array_equal(loaded.object_probs, graph.object_probs)
        assert_array_equal(loaded.pairs[1].probs, [0.25, 0.75])
        self.assertIsNone(loaded.boxes)

    def test_training_log_should_survive_save_and_load(self):
        records = [EpochRecord(1, 2.5, 0.125, 1e-4), EpochRecord(2, 1.75, None, 1e-5)]
        storage = TrainingLogStorage(self.root / "training-log.csv")

        storage.save(records)

        self.assertEqual(storage.load(), records)
        self.assertTrue((self.root / "training-log.csv").read_text().startswith("epoch,loss,val_mr50,lr"))

    def test_process_should_survive_save_and_load_with_its_settings(self):
        config = SynthConfig()
        config.update({"num_categories": 2, "num_predicates": 3, "feature_dim": 3, "max_objects": 4,
                       "annotated_pair_fraction": 0.4, "seed": 7})
        process = build_process(config)
        storage = ProcessStorage(self.root / "process.npz")

        storage.save(process)
        loaded = storage.load()

        assert_array_equal(loaded.relation_prior, process.relation_prior)
        assert_array_equal(loaded.prototypes, process.prototypes)
        self.assertEqual(loaded.config.to_dict(), config.to_dict())

    def test_process_file_should_be_byte_identical_across_saves(self):
        config = SynthConfig()
        config.update({"num_categories": 2, "num_predicates": 3, "feature_dim": 3})
        first, second = self.root / "first.npz", self.root / "second.npz"

        ProcessStorage(first).save(build_process(config))
        ProcessStorage(second).save(build_process(config))

        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_process_without_settings_should_not_be_saved(self):
        process = GroundTruthProcess(np.array([0.5, 0.5]), np.array([[0.25, 0.75], [1.0, 0.0]]),
                                     np.tile([0.6, 0.2, 0.2], (2, 2, 1)), np.arange(6.0).reshape(2, 3))

        with self.assertRaises(ValidationException):
            ProcessStorage(self.root / "process.npz").save(process)

    def test_process_with_missing_arrays_should_raise_format_error(self):
        path = self.root / "process.npz"
        with path.open("wb") as f:
            np.savez(f, category_marginal=np.ones(1))

        with self.assertRaises(FormatException):
            ProcessStorage(path).load()


if __name__ == '__main__':
    unittest.main()
