from django.apps import AppConfig


class QuantizedConsensusConfig(AppConfig):
    name = "quantized_consensus"
    verbose_name = "Quantized Consensus"

    def ready(self) -> None:
        """Import and register system checks for the Quantized Consensus app.

        This method is called when the app is ready and ensures that the settings
        checks from `quantized_consensus.settings.check` are imported. This allows
        Django's system check framework to validate the simulator configuration
        before the CLI runs any command.

        """
        from quantized_consensus.settings import check
