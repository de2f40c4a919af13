""" test """
import os

from bnft.cli import CLI, get_option_parser
from tests import BNFTestCase, __dir__
from tests.mocks import EngineEmul


class FakeOptions(object):
    def __init__(self):
        self.log = os.path.dirname(__file__) + "/../build/bnft.log"
        self.verbose = True
        self.quiet = False
        self.option = []
        self.datadir = os.path.dirname(__file__) + "/../build/acli"
        self.aliases = []
        self.command = "mock"


class TestCLI(BNFTestCase):
    def setUp(self):
        super(TestCLI, self).setUp()
        self.options = FakeOptions()
        self.obj = CLI(self.options)
        self.obj.engine = EngineEmul()

    def test_perform_normal(self):
        ret = self.obj.perform([__dir__() + "/json/mock_normal.json"])
        self.assertEqual(0, ret)
        self.assertTrue(os.path.isfile(os.path.join(self.obj.engine.artifacts_dir, "run-manifest.json")))

    def test_perform_overrides(self):
        self.options.option.append("training.epochs=11")
        self.options.option.append("evaluation.positive=MCI")
        ret = self.obj.perform([__dir__() + "/json/mock_normal.json"])
        self.assertEqual(0, ret)
        self.assertEqual(11, self.obj.engine.config["training"]["epochs"])
        self.assertEqual("MCI", self.obj.engine.config["evaluation"]["positive"])

    def test_perform_overrides_fail(self):
        self.options.option.append("settings.command.0=value")
        ret = self.obj.perform([__dir__() + "/json/mock_normal.json"])
        self.assertEqual(2, ret)

    def test_flags_win_over_configs_and_aliases(self):
        self.options.aliases = ["small-scale"]
        self.options.epochs = 7
        self.options.lambda_c = 0.0
        self.options.subject = "0001"
        self.options.no_ffn = True
        ret = self.obj.perform([__dir__() + "/json/mock_normal.json"])
        self.assertEqual(0, ret)
        config = self.obj.engine.config
        self.assertEqual(7, config["training"]["epochs"])
        self.assertEqual(0.0, config["training"]["lambda-c"])
        self.assertEqual(0.003, config["training"]["lr"])
        self.assertEqual("0001", config["settings"]["subject"])
        self.assertFalse(config["model"]["encoder"]["use-ffn"])
        self.assertTrue(config["model"]["encoder"]["use-norm"])
        self.assertEqual(32, config["model"]["encoder"]["embed"])

    def test_overrides_win_over_aliases(self):
        self.options.aliases = ["small-scale"]
        self.options.option.append("training.epochs=2")
        ret = self.obj.perform([__dir__() + "/json/mock_normal.json"])
        self.assertEqual(0, ret)
        self.assertEqual(2, self.obj.engine.config["training"]["epochs"])
        self.assertEqual(0.003, self.obj.engine.config["training"]["lr"])

    def test_three_class_alias(self):
        self.options.aliases = ["three-class"]
        ret = self.obj.perform([__dir__() + "/json/mock_normal.json"])
        self.assertEqual(0, ret)
        self.assertEqual(["NC", "MCI", "AD"], self.obj.engine.config["modules"]["generate"]["labels"])

    def test_unknown_alias(self):
        self.options.aliases = ["no-such-alias"]
        ret = self.obj.perform([__dir__() + "/json/mock_normal.json"])
        self.assertEqual(2, ret)

    def test_unknown_command(self):
        self.options.command = "teleport"
        ret = self.obj.perform([])
        self.assertEqual(2, ret)

    def test_missing_config(self):
        ret = self.obj.perform([__dir__() + "/json/not-there.json"])
        self.assertEqual(2, ret)

    def test_perform_prepare_err(self):
        ret = self.obj.perform([__dir__() + "/json/mock_prepare_err.json"])
        self.assertEqual(2, ret)

        prov = self.obj.engine.command

        self.assertTrue(prov.was_prepare)
        self.assertFalse(prov.was_startup)
        self.assertFalse(prov.was_check)
        self.assertFalse(prov.was_shutdown)
        self.assertTrue(prov.was_postproc)

    def test_perform_start_err(self):
        conf = __dir__() + "/json/mock_start_err.json"
        self.assertEqual(1, self.obj.perform([conf]))

        prov = self.obj.engine.command
        self.assertTrue(prov.was_prepare)
        self.assertTrue(prov.was_startup)
        self.assertFalse(prov.was_check)
        self.assertTrue(prov.was_shutdown)
        self.assertTrue(prov.was_postproc)

    def test_perform_wait_err(self):
        conf = __dir__() + "/json/mock_wait_err.json"
        self.assertEqual(4, self.obj.perform([conf]))

        prov = self.obj.engine.command
        self.assertTrue(prov.was_prepare)
        self.assertTrue(prov.was_startup)
        self.assertTrue(prov.was_check)
        self.assertTrue(prov.was_shutdown)
        self.assertTrue(prov.was_postproc)

    def test_perform_end_err(self):
        conf = __dir__() + "/json/mock_end_err.json"
        self.assertEqual(3, self.obj.perform([conf]))

        prov = self.obj.engine.command
        self.assertTrue(prov.was_prepare)
        self.assertTrue(prov.was_startup)
        self.assertTrue(prov.was_check)
        self.assertTrue(prov.was_shutdown)
        self.assertTrue(prov.was_postproc)

    def test_perform_postproc_err(self):
        conf = __dir__() + "/json/mock_postproc_err.json"
        self.assertEqual(3, self.obj.perform([conf]))

        prov = self.obj.engine.command
        self.assertTrue(prov.was_prepare)
        self.assertTrue(prov.was_startup)
        self.assertTrue(prov.was_check)
        self.assertTrue(prov.was_shutdown)
        self.assertTrue(prov.was_postproc)


class TestOptionParser(BNFTestCase):
    def test_aliases_and_flags(self):
        parser = get_option_parser()
        options, args = parser.parse_args(["finetune", "-strict-encoder", "--epochs", "5", "--lambda-r", "0",
                                           "--no-norm", "--dataset", "data", "cfg.json"])
        self.assertEqual(["finetune", "cfg.json"], args)
        self.assertEqual(["strict-encoder"], options.aliases)
        self.assertEqual(5, options.epochs)
        self.assertEqual(0.0, options.lambda_r)
        self.assertTrue(options.no_norm)
        self.assertIsNone(options.no_ffn)
        self.assertEqual("data", options.dataset)

    def test_flag_overrides(self):
        options, _ = get_option_parser().parse_args(["eval", "--repeats", "5", "--positive", "MCI", "--no-ffn"])
        options.command = "eval"
        obj = CLI.__new__(CLI)
        obj.options = options
        overrides = dict(obj.flag_overrides())
        self.assertEqual("eval", overrides["settings.command"])
        self.assertEqual(5, overrides["evaluation.repeats"])
        self.assertEqual("MCI", overrides["evaluation.positive"])
        self.assertFalse(overrides["model.encoder.use-ffn"])
        self.assertNotIn("model.encoder.use-norm", overrides)
        self.assertNotIn("training.epochs", overrides)
