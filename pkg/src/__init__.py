# Transition-state transmission - modules du simulateur
