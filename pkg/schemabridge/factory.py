import importlib
import inspect
import logging
import pkgutil
from collections import defaultdict

from schemabridge import adapters
from schemabridge.interfaces import SourceAdapter


log = logging.getLogger(__name__)


class AdapterList(object):
    MEMORY = 'memory'
    DIRECTORY = 'directory'


class AdapterFactory(object):

    """
    Get info and handle on the available source adapter implementations.
    """

    def __init__(self):
        self.adapter_list = defaultdict(dict)
        log.debug("Adapters List: %s", self.adapter_list)

    def register_adapter_class(self, cls):
        """
        Registers an adapter class with the factory. The class must
        inherit from schemabridge.interfaces.SourceAdapter
        and also have a class attribute named ADAPTER_ID.

        The ADAPTER_ID is a user friendly name for the adapter, such as
        'memory'. The ADAPTER_ID must also be included in the
        schemabridge.factory.AdapterList.

        :type  cls: class
        :param cls: A class implementing the SourceAdapter interface.
        """
        if isinstance(cls, type) and issubclass(cls, SourceAdapter):
            if hasattr(cls, "ADAPTER_ID"):
                adapter_id = getattr(cls, "ADAPTER_ID")
                if self.adapter_list.get(adapter_id, {}).get('class'):
                    log.warning("Adapter with id: %s is already "
                                "registered. Overriding with class: %s",
                                adapter_id, cls)
                self.adapter_list[adapter_id]['class'] = cls
            else:
                log.warning("Adapter class: %s implements SourceAdapter but"
                            " does not define ADAPTER_ID. Ignoring...", cls)
        else:
            log.debug("Class: %s does not implement the SourceAdapter"
                      "  interface. Ignoring...", cls)

    def discover_adapters(self):
        """
        Discover all available adapters within the
        ``schemabridge.adapters`` package.
        Note that this methods does not guard against a failed import.
        """
        for _, modname, _ in pkgutil.iter_modules(adapters.__path__):
            log.debug("Importing adapter: %s", modname)
            try:
                self._import_adapter(modname)
            except Exception as e:
                log.debug("Could not import adapter: %s", e)

    def _import_adapter(self, module_name):
        """
        Imports and registers adapters from the given module name.
        Raises an ImportError if the import does not succeed.
        """
        log.debug("Importing adapters from %s", module_name)
        module = importlib.import_module(
            "{0}.{1}".format(adapters.__name__,
                             module_name))
        classes = inspect.getmembers(module, inspect.isclass)
        for _, cls in classes:
            log.debug("Registering the adapter: %s", cls)
            self.register_adapter_class(cls)

    def list_adapters(self):
        """
        Get a list of available adapters.

        It uses a simple automatic discovery system by iterating through all
        submodules in schemabridge.adapters.

        :rtype: dict
        :return: A dict of available adapters and their implementations in
                 the following format::
                 {'memory': {'class': memory.adapter.MemorySourceAdapter},
                  'directory': {'class': directory.adapter.
                                         DirectorySourceAdapter}
                 }
        """
        if not self.adapter_list:
            self.discover_adapters()
        log.debug("List of available adapters: %s", self.adapter_list)
        return self.adapter_list

    def create_adapter(self, name, *args, **kwargs):
        """
        Searches all available adapters for a SourceAdapter implementation
        with the given name, and instantiates it with the given arguments.

        :type name: str
        :param name: Adapter name: one of ``memory``, ``directory``.

        :return:  a concrete adapter instance
        :rtype: ``object`` of :class:`.SourceAdapter`
        """
        log.info("Creating '%s' adapter", name)
        adapter_class = self.get_adapter_class(name)
        if adapter_class is None:
            log.error("An adapter with the name %s could not "
                      "be found", name)
            raise NotImplementedError(
                'An adapter with name {0} could not be'
                ' found'.format(name))
        log.debug("Created '%s' adapter", name)
        return adapter_class(*args, **kwargs)

    def get_adapter_class(self, name):
        """
        Return a class for the requested adapter.

        :rtype: adapter class or ``None``
        :return: A class corresponding to the requested adapter or ``None``
                 if the adapter was not found.
        """
        log.debug("Returning a class for the %s adapter", name)
        impl = self.list_adapters().get(name)
        if impl:
            log.debug("Returning adapter class for %s", name)
            return impl["class"]
        else:
            log.debug("Adapter with the name: %s not found", name)
            return None

    def get_all_adapter_classes(self):
        """
        Returns a list of classes for all available adapter implementations

        :rtype: type ``class`` or ``None``
        :return: A list of all available adapter classes or an empty list
        if none found.
        """
        all_adapters = [impl["class"] for impl in
                        self.list_adapters().values()]
        log.info("List of adapter classes: %s", all_adapters)
        return all_adapters
