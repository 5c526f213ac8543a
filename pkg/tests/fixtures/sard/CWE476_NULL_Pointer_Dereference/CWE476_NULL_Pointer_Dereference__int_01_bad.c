/* TEMPLATE GENERATED TESTCASE FILE
Filename: CWE476_NULL_Pointer_Dereference__int_01.c
Label Definition File: CWE476_NULL_Pointer_Dereference.label.xml
Template File: sources-sinks-01.tmpl.c
*/
#include "std_testcase.h"

#ifndef OMITBAD

void CWE476_NULL_Pointer_Dereference__int_01_bad()
{
    int * data;
    /* POTENTIAL FLAW: Set data to NULL */
    data = NULL;
    /* POTENTIAL FLAW: Attempt to use data, which may be NULL */
    printIntLine(*data); // "bad" sink
    printLine("Calling bad()..."); /* a "comment" inside */
}

#endif /* OMITBAD */

#ifdef INCLUDEMAIN
int main(int argc, char * argv[])
{
    printLine("Calling bad()...");
    CWE476_NULL_Pointer_Dereference__int_01_bad();
    printLine("Finished bad()");
    return 0;
}
#endif
