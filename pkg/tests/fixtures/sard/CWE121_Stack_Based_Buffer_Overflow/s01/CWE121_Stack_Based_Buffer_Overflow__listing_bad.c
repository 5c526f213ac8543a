void CWE121_Buffer_Overflow_badSink(void * data)
{
    {
        /**
            POTENTIAL FLAW:
            treating pointer as a char* when it may point to a wide string
        */
        size_t dataLen = strlen((char *)data);
        void * dest = (void *)ALLOCA((dataLen+1) * sizeof(wchar_t));
        (void)wcscpy(dest, data);
        printLine((char *)dest);
    }
}
