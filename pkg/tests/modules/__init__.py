import os

from tests.mocks import EngineEmul

TINY_CONFIG = os.path.join(os.path.dirname(os.path.dirname(__file__)), "json", "tiny.json")


def run_command(command, configs=(), **settings):
    """
    Full engine lifecycle for one command on top of the tiny test config

    :rtype: EngineEmul
    """
    engine = EngineEmul()
    engine.configure([TINY_CONFIG] + list(configs))
    settings["command"] = command
    engine.config.get("settings").merge(settings)
    engine.prepare()
    try:
        engine.run()
    finally:
        engine.post_process()
    return engine


def generated_dataset(**settings):
    """
    :return: dataset directory written by the generate command
    """
    return run_command("generate", **settings).command.out_dir
